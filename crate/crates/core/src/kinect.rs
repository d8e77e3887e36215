//! Camera-side pipeline: head joints to floor positions, then per-antenna radial
//! velocities over the shared 400 ms bins.

use std::collections::BTreeMap;

use crate::depth::SkeletonFrame;
use crate::error::{Error, Result};
use crate::geometry::Floor;
use crate::ids::{AntennaId, SkeletonId};
use crate::scenario::{Antenna, Scenario};
use crate::timebase::bin_of;

/// Rotates a camera-space joint by the tilt angle into floor-aligned `(x', z')`.
pub fn project_head(joint: [f64; 3], theta_deg: f64) -> (f64, f64) {
    let [x, y, z] = joint;
    let (sin, cos) = theta_deg.to_radians().sin_cos();
    (x, -y * sin + z * cos)
}

/// Projection plus the camera's floor offset, giving room coordinates.
#[derive(Debug, Clone, Copy)]
pub struct FloorProjector {
    origin: Floor,
    tilt_deg: f64,
}

impl FloorProjector {
    pub fn new(scenario: &Scenario) -> Self {
        Self {
            origin: scenario.kinect.floor(),
            tilt_deg: scenario.kinect.tilt_deg,
        }
    }

    pub fn to_floor(&self, joint: [f64; 3]) -> Floor {
        let (x, z) = project_head(joint, self.tilt_deg);
        self.origin + Floor::new(x, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorPosition {
    pub skeleton: SkeletonId,
    pub t: f64,
    pub position: Floor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonVelocitySample {
    pub skeleton: SkeletonId,
    pub bin: u64,
    pub antenna: AntennaId,
    /// Positive toward the antenna.
    pub v: f64,
}

/// Range change between the first and last position of the bin over the elapsed time.
/// `Ok(None)` when fewer than two positions are available.
pub fn radial_velocity(track: &[FloorPosition], antenna: Floor) -> Result<Option<f64>> {
    let (first, last) = match track {
        [] | [_] => return Ok(None),
        [first, .., last] => (first, last),
    };
    let dt = last.t - first.t;
    if dt <= 0.0 {
        return Err(Error::CoincidentTimestamps(first.t));
    }
    let d_first = first.position.distance(antenna);
    let d_last = last.position.distance(antenna);
    Ok(Some((d_first - d_last) / dt))
}

/// Shortest stretch of track inside a bin that yields a velocity. A body seen only at
/// the edge of a bin divides head jitter by a few frame intervals.
pub const MIN_SPAN_S: f64 = 0.2;

/// Everything the camera side knows about one bin.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PersonBin {
    pub bin: u64,
    /// Skeletons present in at least one frame of the bin, with their frame counts.
    pub seen: BTreeMap<SkeletonId, usize>,
    pub samples: Vec<PersonVelocitySample>,
}

impl PersonBin {
    /// Per-antenna velocity vector (antenna order) for a skeleton with a complete bin.
    pub fn velocities(&self, skeleton: SkeletonId) -> Option<Vec<f64>> {
        let v: Vec<f64> = self.samples.iter().filter(|s| s.skeleton == skeleton).map(|s| s.v).collect();
        (!v.is_empty()).then_some(v)
    }
}

/// Incremental tracker fed frames in timestamp order; emits a [`PersonBin`] whenever a
/// bin closes.
pub struct KinectTracker {
    projector: FloorProjector,
    antennas: Vec<Antenna>,
    current: Option<u64>,
    window: BTreeMap<SkeletonId, Vec<FloorPosition>>,
}

impl KinectTracker {
    pub fn new(scenario: &Scenario) -> Self {
        Self::with_antennas(FloorProjector::new(scenario), scenario.antennas.clone())
    }

    pub fn with_antennas(projector: FloorProjector, antennas: Vec<Antenna>) -> Self {
        Self {
            projector,
            antennas,
            current: None,
            window: BTreeMap::new(),
        }
    }

    /// Projects the frame's bodies and returns the closed bins (possibly several if frames
    /// skip bins). Positions of this frame are returned for the track log.
    pub fn push(&mut self, frame: &SkeletonFrame) -> Result<(Vec<FloorPosition>, Vec<PersonBin>)> {
        let bin = bin_of(frame.t);
        let mut closed = Vec::new();
        if let Some(cur) = self.current {
            if bin < cur {
                return Err(Error::validation("frames", "frames must arrive in timestamp order"));
            }
            if bin > cur {
                closed.push(self.close(cur)?);
                closed.extend((cur + 1..bin).map(|b| PersonBin { bin: b, ..Default::default() }));
            }
        }
        self.current = Some(bin);
        let positions: Vec<FloorPosition> = frame
            .bodies
            .iter()
            .map(|b| FloorPosition {
                skeleton: b.skeleton,
                t: frame.t,
                position: self.projector.to_floor(b.head),
            })
            .collect();
        for p in &positions {
            self.window.entry(p.skeleton).or_default().push(*p);
        }
        Ok((positions, closed))
    }

    /// Closes the bin in progress, if any.
    pub fn finish(&mut self) -> Result<Option<PersonBin>> {
        match self.current.take() {
            Some(cur) => self.close(cur).map(Some),
            None => Ok(None),
        }
    }

    fn close(&mut self, bin: u64) -> Result<PersonBin> {
        let window = std::mem::take(&mut self.window);
        let mut out = PersonBin {
            bin,
            ..Default::default()
        };
        for (skeleton, track) in window {
            out.seen.insert(skeleton, track.len());
            let span = track.last().map_or(0.0, |l| l.t) - track.first().map_or(0.0, |f| f.t);
            if span < MIN_SPAN_S {
                continue;
            }
            for antenna in &self.antennas {
                if let Some(v) = radial_velocity(&track, antenna.position)? {
                    out.samples.push(PersonVelocitySample {
                        skeleton,
                        bin,
                        antenna: antenna.id,
                        v,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Batch form of [`KinectTracker`]: every per-(person, antenna, bin) sample of a frame stream.
pub fn bin_person_velocities(frames: &[SkeletonFrame], scenario: &Scenario) -> Result<Vec<PersonVelocitySample>> {
    let mut tracker = KinectTracker::new(scenario);
    let mut out = Vec::new();
    for frame in frames {
        let (_, closed) = tracker.push(frame)?;
        out.extend(closed.into_iter().flat_map(|b| b.samples));
    }
    if let Some(last) = tracker.finish()? {
        out.extend(last.samples);
    }
    Ok(out)
}
