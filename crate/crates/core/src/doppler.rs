//! Doppler and radial velocity from same-carrier phase pairs.
//!
//! Phase differences are only meaningful between readings taken on the same carrier, so
//! pairs never straddle a hop: a reading followed by a different channel is discarded.

use std::collections::BTreeMap;

use crate::geometry::wrap_pi;
use crate::ids::{AntennaId, TagId};
use crate::rfid::{PhaseReading, SPEED_OF_LIGHT};
use crate::timebase::{bin_of, BIN_S};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePair {
    pub phi1: f64,
    pub phi2: f64,
    pub dt: f64,
    pub channel_hz: f64,
}

/// Consecutive same-channel readings of one (tag, antenna), already time-ordered.
pub fn pair_same_frequency(readings: &[PhaseReading]) -> Vec<PhasePair> {
    readings
        .windows(2)
        .filter(|w| w[0].channel_hz == w[1].channel_hz && w[1].t > w[0].t)
        .map(|w| PhasePair {
            phi1: w[0].phi,
            phi2: w[1].phi,
            dt: w[1].t - w[0].t,
            channel_hz: w[0].channel_hz,
        })
        .collect()
}

/// Two-way Doppler shift in Hz, positive while the tag approaches the antenna.
///
/// The phase step is taken on the nearest wrap, `(-π, π]`. Returns `None` for pairs whose
/// spacing is non-positive or longer than one bin.
pub fn estimate_doppler(pair: &PhasePair) -> Option<f64> {
    if !(pair.dt > 0.0 && pair.dt <= BIN_S) {
        return None;
    }
    let dphi = wrap_pi(pair.phi2 - pair.phi1);
    // path phase grows with range, so an approaching tag shows falling phase
    Some(-dphi / (std::f64::consts::TAU * pair.dt))
}

pub fn doppler_to_velocity(doppler_hz: f64, carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT * doppler_hz / (2.0 * carrier_hz)
}

/// Per-bin aggregate: mean over pair velocities (and over pair Doppler shifts).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinVelocity {
    pub v: f64,
    pub doppler_hz: f64,
    pub pairs: usize,
}

/// `None` when no pair survives: the bin is a failed measurement.
pub fn bin_tag_velocity(pairs: &[PhasePair]) -> Option<BinVelocity> {
    let estimates: Vec<(f64, f64)> = pairs
        .iter()
        .filter_map(|p| estimate_doppler(p).map(|fd| (fd, doppler_to_velocity(fd, p.channel_hz))))
        .collect();
    if estimates.is_empty() {
        return None;
    }
    let n = estimates.len() as f64;
    Some(BinVelocity {
        v: estimates.iter().map(|e| e.1).sum::<f64>() / n,
        doppler_hz: estimates.iter().map(|e| e.0).sum::<f64>() / n,
        pairs: estimates.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagVelocitySample {
    pub tag: TagId,
    pub bin: u64,
    pub antenna: AntennaId,
    /// `None` marks a failed measurement.
    pub estimate: Option<BinVelocity>,
}

impl TagVelocitySample {
    pub fn v(&self) -> Option<f64> {
        self.estimate.map(|e| e.v)
    }
}

/// Bins a reading stream into per-(tag, antenna, bin) velocity samples for the listed
/// tags. Every (tag, antenna, bin) in `0..bins` gets a sample, failed where no pair exists.
pub fn estimate_tag_velocities(
    readings: &[PhaseReading],
    tags: &[TagId],
    antennas: &[AntennaId],
    bins: u64,
) -> Vec<TagVelocitySample> {
    let mut grouped: BTreeMap<(TagId, AntennaId, u64), Vec<PhaseReading>> = BTreeMap::new();
    for r in readings {
        let bin = bin_of(r.t);
        if bin < bins && tags.contains(&r.tag) {
            grouped.entry((r.tag, r.antenna, bin)).or_default().push(*r);
        }
    }
    let mut out = Vec::with_capacity(tags.len() * antennas.len() * bins as usize);
    for bin in 0..bins {
        for &tag in tags {
            for &antenna in antennas {
                let estimate = grouped
                    .get(&(tag, antenna, bin))
                    .and_then(|reads| bin_tag_velocity(&pair_same_frequency(reads)));
                out.push(TagVelocitySample {
                    tag,
                    bin,
                    antenna,
                    estimate,
                });
            }
        }
    }
    out
}
