//! Shared clock for both sensor pipelines.
//!
//! Velocity bins are global, epoch-aligned 400 ms slots; bin `k` covers `[0.4k, 0.4(k+1))` s.
//! The depth camera runs at 30 Hz, so frame `n` lands at `n/30` s and every bin holds 12 frames.

pub const BIN_S: f64 = 0.4;
pub const FRAME_RATE_HZ: f64 = 30.0;
pub const FRAMES_PER_BIN: u64 = 12;

// absorbs rounding in t / BIN_S for timestamps that sit exactly on a boundary
const BOUNDARY_SLACK: f64 = 1e-9;

pub fn bin_of(t: f64) -> u64 {
    ((t / BIN_S) + BOUNDARY_SLACK).floor().max(0.0) as u64
}

pub fn bin_start(bin: u64) -> f64 {
    bin as f64 * BIN_S
}

pub fn bin_end(bin: u64) -> f64 {
    (bin + 1) as f64 * BIN_S
}

pub fn frame_time(frame: u64) -> f64 {
    frame as f64 / FRAME_RATE_HZ
}

/// Number of bins that fit completely inside `[0, duration]`.
pub fn complete_bins(duration: f64) -> u64 {
    ((duration / BIN_S) + BOUNDARY_SLACK).floor() as u64
}

/// Bins `< n` have ended by integer second `s`.
pub fn bins_ended_by(second: u64) -> u64 {
    // 400 ms bins: (k + 1) * 2 <= 5 * s
    second * 5 / 2
}
