//! Sensor noise profiles and the reader's read-rate model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub name: String,
    /// Per-axis Gaussian noise on camera-space head joints.
    pub head_sigma_m: f64,
    /// Gaussian phase noise of a single reading with one person in the room.
    pub phase_sigma_rad: f64,
    /// Phase-noise multiplier applied once per person beyond the first (body reflections).
    pub multipath_factor: f64,
    /// Noise of the reader's built-in Doppler report.
    pub api_doppler_sigma_hz: f64,
}

impl NoiseProfile {
    pub fn standard() -> Self {
        Self {
            name: "default".into(),
            head_sigma_m: 0.05,
            phase_sigma_rad: 0.04,
            multipath_factor: 1.3,
            api_doppler_sigma_hz: 2.68,
        }
    }

    pub fn noiseless() -> Self {
        Self {
            name: "noiseless".into(),
            head_sigma_m: 0.0,
            phase_sigma_rad: 0.0,
            multipath_factor: 1.0,
            api_doppler_sigma_hz: 0.0,
        }
    }

    /// Noiseless camera with default RFID noise.
    pub fn ideal_camera() -> Self {
        Self {
            name: "ideal-camera".into(),
            head_sigma_m: 0.0,
            ..Self::standard()
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::standard()),
            "noiseless" => Ok(Self::noiseless()),
            "ideal-camera" => Ok(Self::ideal_camera()),
            other => Err(Error::validation(
                "noise-profile",
                format!("unknown profile `{other}` (expected default, noiseless or ideal-camera)"),
            )),
        }
    }

    /// Phase noise with `people` bodies in the room.
    pub fn effective_phase_sigma(&self, people: usize) -> f64 {
        let extra = people.saturating_sub(1) as i32;
        self.phase_sigma_rad * self.multipath_factor.powi(extra)
    }
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self::standard()
    }
}

/// Successful-read timing of the reader.
///
/// Each tag is read as a renewal process whose mean interval grows linearly with the
/// number of tags in the field; reads land on whichever antenna holds the current
/// time slot, so the same-antenna interval also grows linearly with the antenna count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadModel {
    /// Mean interval between reads of one tag, per tag in the field.
    pub base_interval_s: f64,
    /// Fraction of the mean interval that is a hard minimum between reads of one tag.
    pub dead_time_fraction: f64,
    /// Length of one antenna slot in the round-robin multiplexing.
    pub antenna_slot_s: f64,
}

impl Default for ReadModel {
    fn default() -> Self {
        Self {
            base_interval_s: 0.0006,
            dead_time_fraction: 0.4,
            antenna_slot_s: 0.02,
        }
    }
}

impl ReadModel {
    /// Mean interval between reads of one tag on any antenna.
    pub fn per_tag_interval(&self, tags: usize) -> f64 {
        self.base_interval_s * tags.max(1) as f64
    }

    /// Mean interval between reads of one tag on one particular antenna.
    pub fn same_antenna_interval(&self, tags: usize, antennas: usize) -> f64 {
        self.per_tag_interval(tags) * antennas.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimConfig {
    pub noise: NoiseProfile,
    pub read_model: ReadModel,
}
