//! Run metrics. Every function here is a pure function of run logs plus the scenario.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::doppler::TagVelocitySample;
use crate::error::{Error, Result};
use crate::fusion::{Event, EventKind, IdentityRecord, SyncRecord, WINDOW_BINS};
use crate::ids::{PersonId, SkeletonId, TagId};
use crate::kinect::FloorPosition;
use crate::rfid::ReaderDopplerReading;
use crate::scenario::Scenario;
use crate::timebase::{bin_end, bin_start, BIN_S};

/// Lifetime of one issued skeleton and the person it belonged to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonRecord {
    pub skeleton_id: SkeletonId,
    pub person_id: PersonId,
    pub first_t: f64,
    pub last_t: f64,
}

pub fn owners(skeletons: &[SkeletonRecord]) -> BTreeMap<SkeletonId, PersonId> {
    skeletons.iter().map(|s| (s.skeleton_id, s.person_id)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    /// Population statistics; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

/// Per-second share of tagged people in view that carry their own tag's identity.
/// Seconds at or before `skip_s`, and seconds with no tagged person in view, are left out.
pub fn identification_accuracy_series(
    identity: &[IdentityRecord],
    owners: &BTreeMap<SkeletonId, PersonId>,
    scenario: &Scenario,
    skip_s: f64,
) -> Vec<(u64, f64)> {
    let mut per_second: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    for r in identity.iter().filter(|r| r.t_s as f64 > skip_s) {
        let Some(own) = owners.get(&r.skeleton).and_then(|p| scenario.tag_of(*p)) else {
            continue;
        };
        let slot = per_second.entry(r.t_s).or_default();
        slot.1 += 1;
        if r.tag == Some(own) {
            slot.0 += 1;
        }
    }
    per_second
        .into_iter()
        .map(|(s, (ok, n))| (s, ok as f64 / n as f64))
        .collect()
}

pub fn identification_accuracy(
    identity: &[IdentityRecord],
    owners: &BTreeMap<SkeletonId, PersonId>,
    scenario: &Scenario,
    skip_s: f64,
) -> Option<Summary> {
    let series: Vec<f64> = identification_accuracy_series(identity, owners, scenario, skip_s)
        .into_iter()
        .map(|(_, a)| a)
        .collect();
    Summary::of(&series)
}

/// Share of whole seconds in `(skip_s, duration]` at which the target tag is bound to a
/// skeleton of its wearer.
pub fn target_tracking_accuracy(
    identity: &[IdentityRecord],
    owners: &BTreeMap<SkeletonId, PersonId>,
    scenario: &Scenario,
    target: TagId,
    skip_s: f64,
) -> Result<f64> {
    if !scenario.tags.iter().any(|t| t.id == target) {
        return Err(Error::UnknownTag(target.0));
    }
    let wearer = scenario.wearer_of(target);
    let seconds: Vec<u64> = (1..=scenario.duration_s.floor() as u64).filter(|&s| s as f64 > skip_s).collect();
    if seconds.is_empty() {
        return Ok(0.0);
    }
    let hits: BTreeSet<u64> = identity
        .iter()
        .filter(|r| r.tag == Some(target) && wearer.is_some() && owners.get(&r.skeleton).copied() == wearer)
        .map(|r| r.t_s)
        .collect();
    let ok = seconds.iter().filter(|s| hits.contains(s)).count();
    Ok(ok as f64 / seconds.len() as f64)
}

/// Floor-plane RMSE of the track log against ground truth, in cm.
pub fn tracking_rmse(
    tracks: &[FloorPosition],
    owners: &BTreeMap<SkeletonId, PersonId>,
    scenario: &Scenario,
) -> Result<f64> {
    if tracks.is_empty() {
        return Err(Error::EmptyLog("tracks"));
    }
    let mut sum = 0.0;
    for p in tracks {
        let person = owners
            .get(&p.skeleton)
            .and_then(|id| scenario.person(*id))
            .ok_or_else(|| Error::validation("tracks", format!("skeleton {} has no owner", p.skeleton)))?;
        let (truth, _) = person.kinematics_at(p.t);
        sum += truth.distance(p.position).powi(2);
    }
    Ok((sum / tracks.len() as f64).sqrt() * 100.0)
}

/// Share of bins dropped on the way to each block of retained bins, averaged over the
/// completed blocks. `None` until one block completes.
pub fn drop_rate(sync: &[SyncRecord]) -> Option<f64> {
    let mut rates = Vec::new();
    let (mut dropped, mut retained) = (0usize, 0usize);
    for r in sync {
        if r.retained {
            retained += 1;
            if retained == WINDOW_BINS {
                rates.push(dropped as f64 / (dropped + WINDOW_BINS) as f64);
                dropped = 0;
                retained = 0;
            }
        } else {
            dropped += 1;
        }
    }
    (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Bin-average true radial velocity of a person toward a point.
pub fn true_bin_velocity(scenario: &Scenario, person: PersonId, antenna: crate::geometry::Floor, bin: u64) -> Option<f64> {
    let p = scenario.person(person)?;
    let d0 = p.kinematics_at(bin_start(bin)).0.distance(antenna);
    let d1 = p.kinematics_at(bin_end(bin)).0.distance(antenna);
    Some((d0 - d1) / BIN_S)
}

/// Mean |v_rfid − v_truth| over successful bins of worn tags, cm/s.
pub fn velocity_error(samples: &[TagVelocitySample], scenario: &Scenario) -> Option<f64> {
    let errors: Vec<f64> = samples
        .iter()
        .filter_map(|s| {
            let v = s.v()?;
            let wearer = scenario.wearer_of(s.tag)?;
            let antenna = scenario.antennas.iter().find(|a| a.id == s.antenna)?;
            let truth = true_bin_velocity(scenario, wearer, antenna.position, s.bin)?;
            Some((v - truth).abs() * 100.0)
        })
        .collect();
    Summary::of(&errors).map(|s| s.mean)
}

fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn fixed_tags(scenario: &Scenario) -> BTreeSet<TagId> {
    scenario.tags.iter().filter(|t| t.position.is_some()).map(|t| t.id).collect()
}

/// Std of the per-bin phase-pair Doppler of unworn enrolled tags, Hz.
pub fn estimator_doppler_std(samples: &[TagVelocitySample], scenario: &Scenario) -> Option<f64> {
    let fixed = fixed_tags(scenario);
    let values: Vec<f64> = samples
        .iter()
        .filter(|s| fixed.contains(&s.tag))
        .filter_map(|s| s.estimate.map(|e| e.doppler_hz))
        .collect();
    sample_std(&values)
}

/// Std of the reader's own Doppler reports for unworn enrolled tags, Hz.
pub fn api_doppler_std(api: &[ReaderDopplerReading], scenario: &Scenario) -> Option<f64> {
    let fixed = fixed_tags(scenario);
    let values: Vec<f64> = api.iter().filter(|r| fixed.contains(&r.tag)).map(|r| r.doppler_hz).collect();
    sample_std(&values)
}

/// Seconds from each tagged person's skeleton first appearing to the first assignment
/// of that skeleton to its wearer's tag. Skeletons that never get there count as infinite.
pub fn identification_times(events: &[Event], skeletons: &[SkeletonRecord], scenario: &Scenario) -> Vec<f64> {
    skeletons
        .iter()
        .filter_map(|s| {
            let own = scenario.tag_of(s.person_id)?;
            let hit = events
                .iter()
                .find(|e| e.kind == EventKind::Assign && e.skeleton == Some(s.skeleton_id) && e.tag == Some(own));
            Some(hit.map_or(f64::INFINITY, |e| e.t - s.first_t))
        })
        .collect()
}

/// Median with infinite entries allowed; `None` for an empty sample or an infinite median.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    m.is_finite().then_some(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::IdentityStatus;
    use crate::geometry::Floor;
    use crate::scenario::presets;
    use approx::assert_abs_diff_eq;

    fn rec(t_s: u64, skeleton: u64, tag: Option<u32>) -> IdentityRecord {
        IdentityRecord {
            t_s,
            skeleton: SkeletonId(skeleton),
            tag: tag.map(TagId),
            status: if tag.is_some() { IdentityStatus::Matched } else { IdentityStatus::Accumulating },
        }
    }

    fn two_people() -> (Scenario, BTreeMap<SkeletonId, PersonId>) {
        let s = presets::in_view_walkers(2, 10.0, 1);
        let owners = [(SkeletonId(10), PersonId(1)), (SkeletonId(11), PersonId(2))].into_iter().collect();
        (s, owners)
    }

    #[test]
    fn accuracy_examples() {
        let (s, owners) = two_people();
        let all_right: Vec<_> = (1..=10).flat_map(|t| [rec(t, 10, Some(1)), rec(t, 11, Some(2))]).collect();
        assert_eq!(identification_accuracy(&all_right, &owners, &s, 0.0).unwrap().mean, 1.0);
        let swapped: Vec<_> = (1..=10).flat_map(|t| [rec(t, 10, Some(2)), rec(t, 11, Some(1))]).collect();
        assert_eq!(identification_accuracy(&swapped, &owners, &s, 0.0).unwrap().mean, 0.0);
        let half: Vec<_> = (1..=10).flat_map(|t| [rec(t, 10, Some(1)), rec(t, 11, None)]).collect();
        let st = identification_accuracy(&half, &owners, &s, 0.0).unwrap();
        assert_eq!((st.mean, st.std, st.count), (0.5, 0.0, 10));
        assert_eq!(identification_accuracy(&half, &owners, &s, 4.0).unwrap().count, 6);
    }

    #[test]
    fn untagged_people_are_not_counted() {
        let (mut s, owners) = two_people();
        s.tags.truncate(1);
        let log: Vec<_> = (1..=4).flat_map(|t| [rec(t, 10, Some(1)), rec(t, 11, None)]).collect();
        assert_eq!(identification_accuracy(&log, &owners, &s, 0.0).unwrap().mean, 1.0);
    }

    #[test]
    fn target_tracking_examples() {
        let (s, owners) = two_people();
        let log: Vec<_> = (3..=10).map(|t| rec(t, 10, Some(1))).collect();
        assert_abs_diff_eq!(target_tracking_accuracy(&log, &owners, &s, TagId(1), 0.0).unwrap(), 0.8);
        assert_abs_diff_eq!(target_tracking_accuracy(&log, &owners, &s, TagId(1), 2.0).unwrap(), 1.0);
        assert_eq!(target_tracking_accuracy(&[], &owners, &s, TagId(1), 0.0).unwrap(), 0.0);
        assert!(matches!(
            target_tracking_accuracy(&log, &owners, &s, TagId(9), 0.0),
            Err(Error::UnknownTag(9))
        ));
    }

    #[test]
    fn rmse_examples() {
        let s = presets::single_walker(10.0, 2);
        let owners: BTreeMap<_, _> = [(SkeletonId(1), PersonId(1))].into_iter().collect();
        let n = 50;
        let mut tracks: Vec<FloorPosition> = (0..n)
            .map(|k| {
                let t = k as f64 * 0.1;
                FloorPosition {
                    skeleton: SkeletonId(1),
                    t,
                    position: s.persons[0].kinematics_at(t).0,
                }
            })
            .collect();
        assert!(tracking_rmse(&tracks, &owners, &s).unwrap() < 1e-9);
        tracks[7].position = tracks[7].position + Floor::new(0.06, 0.08);
        assert_abs_diff_eq!(tracking_rmse(&tracks, &owners, &s).unwrap(), 10.0 / (n as f64).sqrt(), epsilon = 1e-9);
        assert!(matches!(tracking_rmse(&[], &owners, &s), Err(Error::EmptyLog(_))));
    }

    fn sync(pattern: &str) -> Vec<SyncRecord> {
        pattern
            .chars()
            .enumerate()
            .map(|(i, c)| SyncRecord {
                bin: i as u64,
                retained: c == 'r',
            })
            .collect()
    }

    #[test]
    fn drop_rate_examples() {
        assert_eq!(drop_rate(&sync(&"r".repeat(40))), Some(0.0));
        let two = "rrdrrrrrdrrrrrrrrrrrrr";
        assert_abs_diff_eq!(drop_rate(&sync(two)).unwrap(), 2.0 / 22.0, epsilon = 1e-12);
        assert_eq!(drop_rate(&sync(&"r".repeat(19))), None);
        let blocks = format!("{}{}", "d".repeat(5) + &"r".repeat(20), "r".repeat(20));
        assert_abs_diff_eq!(drop_rate(&sync(&blocks)).unwrap(), (0.2 + 0.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn median_handles_censoring() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[1.0, 2.0, f64::INFINITY, 4.0]), Some(3.0));
        assert_eq!(median(&[1.0, f64::INFINITY, f64::INFINITY]), None);
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn summary_stats() {
        let s = Summary::of(&[1.0, 0.5, 0.0, 0.5]).unwrap();
        assert_eq!((s.min, s.max, s.mean), (0.0, 1.0, 0.5));
        assert_abs_diff_eq!(s.std, (0.125f64).sqrt(), epsilon = 1e-12);
    }
}
