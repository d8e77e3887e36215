//! Frequency-hopping UHF reader: carrier plan, irregular per-tag reads on time-multiplexed
//! antennas, wrapped phase observations, and the reader's own (noisy) Doppler report.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::config::{NoiseProfile, ReadModel};
use crate::error::{Error, Result};
use crate::geometry::{wrap_2pi, Floor};
use crate::ids::{AntennaId, TagId};
use crate::rng::{self, streams};
use crate::scenario::{Antenna, Scenario};
use crate::world::true_radial_velocity;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const CHANNEL_BASE_HZ: f64 = 902.75e6;
pub const CHANNEL_STEP_HZ: f64 = 0.5e6;
pub const CHANNEL_COUNT: usize = 50;
/// Regulatory ceiling on one carrier dwell.
pub const MAX_DWELL_S: f64 = 0.4;
pub const MIN_DWELL_S: f64 = 0.2;
/// Background tags get IDs from here up, clear of enrolled badges.
pub const BACKGROUND_TAG_BASE: u32 = 100_000;

pub fn channel_frequency(channel: usize) -> f64 {
    CHANNEL_BASE_HZ + channel as f64 * CHANNEL_STEP_HZ
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dwell {
    pub start: f64,
    pub end: f64,
    pub channel: usize,
}

impl Dwell {
    pub fn frequency(&self) -> f64 {
        channel_frequency(self.channel)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarrierPlan {
    pub dwells: Vec<Dwell>,
}

impl CarrierPlan {
    /// Dwell active at `t`; the plan's final dwell also covers its closing instant.
    pub fn dwell_at(&self, t: f64) -> Option<&Dwell> {
        let i = self.dwells.partition_point(|d| d.end <= t);
        self.dwells.get(i).or_else(|| self.dwells.last().filter(|d| d.end == t))
    }
}

/// Pseudo-random hop sequence over the 50-channel band, dwells of 0.2–0.4 s, no channel
/// repeated back-to-back.
pub fn make_carrier_plan(seed: u64, duration: f64) -> Result<CarrierPlan> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::validation("duration_s", "must be positive"));
    }
    let mut rng = rng::stream(seed, &[streams::CARRIER]);
    let channels: Vec<usize> = (0..CHANNEL_COUNT).collect();
    let mut dwells: Vec<Dwell> = Vec::new();
    let mut start = 0.0;
    while start < duration {
        let len = rng.random_range(MIN_DWELL_S..=MAX_DWELL_S);
        let end = (start + len).min(duration);
        let channel = loop {
            let c = *channels.choose(&mut rng).expect("non-empty band");
            if dwells.last().is_none_or(|d| d.channel != c) {
                break c;
            }
        };
        dwells.push(Dwell { start, end, channel });
        start = end;
    }
    Ok(CarrierPlan { dwells })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseReading {
    pub tag: TagId,
    pub antenna: AntennaId,
    pub t: f64,
    pub channel_hz: f64,
    /// Wrapped to `[0, 2π)`.
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReaderDopplerReading {
    pub tag: TagId,
    pub antenna: AntennaId,
    pub t: f64,
    pub doppler_hz: f64,
}

/// Where a tag sits over time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TagSite {
    Worn(crate::ids::PersonId),
    Fixed(Floor),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagInField {
    pub tag: TagId,
    pub site: TagSite,
    pub enrolled: bool,
}

/// Enrolled tags followed by the background tags, at seeded positions inside the room.
pub fn tag_population(scenario: &Scenario, seed: u64) -> Vec<TagInField> {
    let mut out: Vec<TagInField> = scenario
        .tags
        .iter()
        .map(|t| TagInField {
            tag: t.id,
            site: match (t.person, t.position) {
                (Some(p), _) => TagSite::Worn(p),
                (None, Some(pos)) => TagSite::Fixed(pos),
                (None, None) => unreachable!("validated scenario"),
            },
            enrolled: true,
        })
        .collect();
    let room = scenario.room;
    for i in 0..scenario.background_tags {
        let u = rng::unit(seed, &[streams::BACKGROUND, i as u64, 0]);
        let w = rng::unit(seed, &[streams::BACKGROUND, i as u64, 1]);
        let pos = Floor::new(
            room.x_min + u * (room.x_max - room.x_min),
            room.z_min + w * (room.z_max - room.z_min),
        );
        out.push(TagInField {
            tag: TagId(BACKGROUND_TAG_BASE + i),
            site: TagSite::Fixed(pos),
            enrolled: false,
        });
    }
    out
}

fn tag_kinematics(scenario: &Scenario, site: TagSite, t: f64) -> (Floor, Floor) {
    match site {
        TagSite::Fixed(p) => (p, Floor::ZERO),
        TagSite::Worn(person) => scenario
            .person(person)
            .expect("validated scenario")
            .kinematics_at(t),
    }
}

/// Two-way free-space path phase, unwrapped.
pub fn path_phase(frequency_hz: f64, distance_m: f64) -> f64 {
    4.0 * std::f64::consts::PI * frequency_hz * distance_m / SPEED_OF_LIGHT
}

/// Hardware phase offset, constant per (tag, antenna, channel) for the whole run.
pub fn phase_offset(seed: u64, tag: TagId, antenna: AntennaId, channel: usize) -> f64 {
    std::f64::consts::TAU * rng::unit(seed, &[streams::PHASE_OFFSET, tag.0 as u64, antenna.0 as u64, channel as u64])
}

/// Output of one simulated inventory session.
#[derive(Debug, Clone, Default)]
pub struct ReaderOutput {
    pub readings: Vec<PhaseReading>,
    pub api: Vec<ReaderDopplerReading>,
}

/// Inventory reader over a whole scenario.
pub struct ReaderSim<'a> {
    scenario: &'a Scenario,
    plan: &'a CarrierPlan,
    model: ReadModel,
    noise: NoiseProfile,
    seed: u64,
}

impl<'a> ReaderSim<'a> {
    pub fn new(scenario: &'a Scenario, plan: &'a CarrierPlan, model: ReadModel, noise: NoiseProfile, seed: u64) -> Self {
        Self {
            scenario,
            plan,
            model,
            noise,
            seed,
        }
    }

    fn antenna_at(&self, dwell: &Dwell, t: f64) -> &Antenna {
        let slot = ((t - dwell.start) / self.model.antenna_slot_s).floor() as usize;
        &self.scenario.antennas[slot % self.scenario.antennas.len()]
    }

    /// Reads of every tag in the field, in timestamp order, with the matching API
    /// Doppler reports.
    pub fn run(&self) -> ReaderOutput {
        let population = tag_population(self.scenario, self.seed);
        let n_tags = population.len();
        let mean = self.model.per_tag_interval(n_tags);
        let dead = mean * self.model.dead_time_fraction;
        let gap = Exp::new(1.0 / (mean - dead)).expect("positive read rate");
        let phase_sigma = self.noise.effective_phase_sigma(self.scenario.persons.len());
        let phase_noise = (phase_sigma > 0.0).then(|| Normal::new(0.0, phase_sigma).expect("finite sigma"));
        let api_noise = (self.noise.api_doppler_sigma_hz > 0.0)
            .then(|| Normal::new(0.0, self.noise.api_doppler_sigma_hz).expect("finite sigma"));

        let mut out = ReaderOutput::default();
        for entry in &population {
            let mut rng: ChaCha8Rng = rng::stream(self.seed, &[streams::TAG_READS, entry.tag.0 as u64]);
            for dwell in &self.plan.dwells {
                // inventory restarts on every hop
                let mut t = dwell.start + dead + gap.sample(&mut rng);
                while t < dwell.end {
                    let antenna = self.antenna_at(dwell, t);
                    let (pos, vel) = tag_kinematics(self.scenario, entry.site, t);
                    let f = dwell.frequency();
                    let mut phi = path_phase(f, pos.distance(antenna.position))
                        + phase_offset(self.seed, entry.tag, antenna.id, dwell.channel);
                    if let Some(n) = &phase_noise {
                        phi += n.sample(&mut rng);
                    }
                    out.readings.push(PhaseReading {
                        tag: entry.tag,
                        antenna: antenna.id,
                        t,
                        channel_hz: f,
                        phi: wrap_2pi(phi),
                    });
                    let v = true_radial_velocity(pos, vel, antenna.position).unwrap_or(0.0);
                    out.api.push(api_doppler(entry.tag, antenna.id, t, v, f, api_noise.as_ref(), &mut rng));
                    t += dead + gap.sample(&mut rng);
                }
            }
        }
        out.readings.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.tag.cmp(&b.tag)));
        out.api.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.tag.cmp(&b.tag)));
        out
    }
}

/// The reader's built-in Doppler report: true two-way Doppler plus Gaussian noise.
pub fn api_doppler<R: Rng + ?Sized>(
    tag: TagId,
    antenna: AntennaId,
    t: f64,
    radial_v: f64,
    channel_hz: f64,
    noise: Option<&Normal<f64>>,
    rng: &mut R,
) -> ReaderDopplerReading {
    let mut doppler_hz = 2.0 * channel_hz * radial_v / SPEED_OF_LIGHT;
    if let Some(n) = noise {
        doppler_hz += n.sample(rng);
    }
    ReaderDopplerReading {
        tag,
        antenna,
        t,
        doppler_hz,
    }
}

pub fn read_events(
    scenario: &Scenario,
    plan: &CarrierPlan,
    model: &ReadModel,
    noise: &NoiseProfile,
    seed: u64,
) -> Vec<PhaseReading> {
    ReaderSim::new(scenario, plan, model.clone(), noise.clone(), seed).run().readings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::PersonId;
    use crate::scenario::{Person, Tag, Waypoint};
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    #[test]
    fn plan_invariants() {
        let plan = make_carrier_plan(3, 4.0).unwrap();
        assert!(plan.dwells.len() >= 10);
        assert_eq!(plan.dwells[0].start, 0.0);
        assert_eq!(plan.dwells.last().unwrap().end, 4.0);
        for w in plan.dwells.windows(2) {
            assert_eq!(w[0].end, w[1].start);
            assert_ne!(w[0].channel, w[1].channel);
        }
        for d in &plan.dwells {
            assert!(d.end - d.start <= MAX_DWELL_S + 1e-12);
            assert!((902.75e6..=927.25e6).contains(&d.frequency()));
        }
        assert_eq!(plan, make_carrier_plan(3, 4.0).unwrap());
        assert_ne!(plan, make_carrier_plan(4, 4.0).unwrap());
        assert!(make_carrier_plan(1, 0.0).is_err());
    }

    #[test]
    fn dwell_lookup() {
        let plan = make_carrier_plan(9, 10.0).unwrap();
        for d in &plan.dwells {
            assert_eq!(plan.dwell_at(d.start), Some(d));
        }
        assert_eq!(plan.dwell_at(10.0), plan.dwells.last());
        assert_eq!(plan.dwell_at(10.5), None);
    }

    /// Independent reference: subtract whole turns one at a time.
    fn brute_wrap(mut phi: f64) -> f64 {
        while phi >= 2.0 * PI {
            phi -= 2.0 * PI;
        }
        while phi < 0.0 {
            phi += 2.0 * PI;
        }
        phi
    }

    #[test]
    fn phase_of_a_tag_one_meter_away() {
        let f = 915e6;
        let expected = brute_wrap(4.0 * PI * f * 1.0 / SPEED_OF_LIGHT);
        assert_abs_diff_eq!(wrap_2pi(path_phase(f, 1.0)), expected, epsilon = 1e-9);
        assert_abs_diff_eq!(expected, 0.654852, epsilon = 1e-6);
    }

    #[test]
    fn quarter_wavelength_closer_shifts_phase_by_pi() {
        let f = 915e6;
        let d = 2.3;
        let closer = d - SPEED_OF_LIGHT / (4.0 * f);
        let delta = wrap_2pi(path_phase(f, closer)) - wrap_2pi(path_phase(f, d));
        assert_abs_diff_eq!(crate::geometry::wrap_pi(delta).abs(), PI, epsilon = 1e-9);
        assert_abs_diff_eq!(path_phase(f, closer) - path_phase(f, d), -PI, epsilon = 1e-9);
    }

    fn room_with_tags(n_tags: u32, antennas: usize) -> Scenario {
        let mut s = Scenario::from_toml_str(include_str!("../../../scenarios/crossed_badges.toml")).unwrap();
        s.duration_s = 20.0;
        s.persons = vec![Person {
            id: PersonId(1),
            head_height_m: 1.7,
            waypoints: vec![Waypoint::new(0.0, 0.3, 2.0)],
        }];
        s.tags = vec![Tag {
            id: crate::ids::TagId(1),
            person: Some(PersonId(1)),
            position: None,
        }];
        s.with_total_tags(n_tags).unwrap().with_antenna_count(antennas).unwrap()
    }

    fn mean_same_antenna_interval(s: &Scenario) -> f64 {
        let plan = make_carrier_plan(1, s.duration_s).unwrap();
        let reads = read_events(s, &plan, &ReadModel::default(), &NoiseProfile::standard(), 1);
        let mut last: BTreeMap<(TagId, AntennaId), f64> = BTreeMap::new();
        let mut gaps = Vec::new();
        for r in reads.iter().filter(|r| r.tag == TagId(1)) {
            if let Some(prev) = last.insert((r.tag, r.antenna), r.t) {
                gaps.push(r.t - prev);
            }
        }
        gaps.iter().sum::<f64>() / gaps.len() as f64
    }

    #[test]
    fn second_antenna_stretches_same_antenna_interval() {
        let one = mean_same_antenna_interval(&room_with_tags(25, 1));
        let two = mean_same_antenna_interval(&room_with_tags(25, 2));
        assert!(two > 1.5 * one, "1 antenna {one}, 2 antennas {two}");
        let more_tags = mean_same_antenna_interval(&room_with_tags(50, 1));
        assert!(more_tags > 1.5 * one);
    }

    #[test]
    fn reads_are_ordered_deterministic_and_multiplexed() {
        let s = room_with_tags(10, 2);
        let plan = make_carrier_plan(5, s.duration_s).unwrap();
        let a = ReaderSim::new(&s, &plan, ReadModel::default(), NoiseProfile::standard(), 5).run();
        let b = ReaderSim::new(&s, &plan, ReadModel::default(), NoiseProfile::standard(), 5).run();
        assert_eq!(a.readings, b.readings);
        assert_eq!(a.readings.len(), a.api.len());
        for w in a.readings.windows(2) {
            assert!(w[0].t < w[1].t, "strictly increasing timestamps");
        }
        let slot = ReadModel::default().antenna_slot_s;
        for r in &a.readings {
            assert!((0.0..2.0 * PI).contains(&r.phi));
            let d = plan.dwell_at(r.t).unwrap();
            assert_eq!(r.channel_hz, d.frequency());
            let expected = s.antennas[((r.t - d.start) / slot).floor() as usize % 2].id;
            assert_eq!(r.antenna, expected);
        }
    }

    #[test]
    fn stationary_same_channel_readings_differ_only_by_noise() {
        let s = room_with_tags(1, 1);
        let plan = make_carrier_plan(2, s.duration_s).unwrap();
        let reads = read_events(&s, &plan, &ReadModel::default(), &NoiseProfile::noiseless(), 2);
        let mut by_channel: BTreeMap<u64, f64> = BTreeMap::new();
        for r in &reads {
            let prev = by_channel.entry(r.channel_hz as u64).or_insert(r.phi);
            assert_abs_diff_eq!(*prev, r.phi, epsilon = 1e-9);
        }
        assert!(by_channel.len() > 10);
    }

    #[test]
    fn api_doppler_statistics() {
        let mut rng = rng::stream(0, &[99]);
        let noise = Normal::new(0.0, 2.68).unwrap();
        let draws: Vec<f64> = (0..10_000)
            .map(|_| api_doppler(TagId(1), AntennaId(1), 0.0, 0.0, 915e6, Some(&noise), &mut rng).doppler_hz)
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let std = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        assert!((std - 2.68).abs() < 0.1, "{std}");

        let exact = api_doppler(TagId(1), AntennaId(1), 0.0, 1.2, 915e6, None, &mut rng);
        assert_eq!(exact.doppler_hz, 2.0 * 915e6 * 1.2 / SPEED_OF_LIGHT);
    }
}
