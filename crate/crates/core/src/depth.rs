//! Depth-camera model: head joints in camera space with field-of-view limits, a body cap
//! and per-visit skeleton IDs.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::Floor;
use crate::ids::{PersonId, SkeletonId};
use crate::rng::{self, streams};
use crate::scenario::Scenario;
use crate::timebase::frame_time;
use crate::world::WorldState;

pub const MIN_RANGE_M: f64 = 0.5;
pub const MAX_RANGE_M: f64 = 4.5;
pub const FOV_HALF_ANGLE_DEG: f64 = 35.0;
pub const MAX_BODIES: usize = 6;
const FIRST_SKELETON_ID: u64 = 72_057_594_037_927_936;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub skeleton: SkeletonId,
    /// Head joint in camera space (x, y, z), meters.
    pub head: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    pub frame: u64,
    pub t: f64,
    pub bodies: Vec<Body>,
}

/// Floor-plane range from the camera and bearing off the optical axis in degrees.
fn range_and_bearing(scenario: &Scenario, position: Floor) -> (f64, f64) {
    let rel = position - scenario.kinect.floor();
    (rel.norm(), rel.x.atan2(rel.z).to_degrees())
}

pub fn visible(scenario: &Scenario, position: Floor) -> bool {
    let (range, bearing) = range_and_bearing(scenario, position);
    (MIN_RANGE_M..=MAX_RANGE_M).contains(&range) && bearing.abs() <= FOV_HALF_ANGLE_DEG
}

/// Camera-space head joint whose floor projection is exactly `position`.
///
/// Height above the camera fixes `y`; `z` is then chosen so the tilt projection lands on
/// the floor offset from the camera.
pub fn exact_camera_coords(scenario: &Scenario, position: Floor, head_height: f64) -> [f64; 3] {
    let rel = position - scenario.kinect.floor();
    let (sin, cos) = scenario.tilt_rad().sin_cos();
    let y = head_height - scenario.kinect.height();
    let z = (rel.z + y * sin) / cos;
    [rel.x, y, z]
}

/// Stateful frame generator. Skeleton IDs persist while a person stays continuously visible.
pub struct DepthSensor<'a> {
    scenario: &'a Scenario,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
    active: BTreeMap<PersonId, SkeletonId>,
    issued: BTreeMap<SkeletonId, PersonId>,
    next_id: u64,
}

impl<'a> DepthSensor<'a> {
    pub fn new(scenario: &'a Scenario, head_sigma_m: f64, seed: u64) -> Self {
        let noise = (head_sigma_m > 0.0).then(|| Normal::new(0.0, head_sigma_m).expect("finite sigma"));
        Self {
            scenario,
            noise,
            rng: rng::stream(seed, &[streams::DEPTH]),
            active: BTreeMap::new(),
            issued: BTreeMap::new(),
            next_id: FIRST_SKELETON_ID,
        }
    }

    pub fn sample_frame(&mut self, frame: u64, world: &WorldState) -> SkeletonFrame {
        let mut candidates: Vec<(f64, PersonId, Floor)> = world
            .persons
            .iter()
            .filter(|p| visible(self.scenario, p.position))
            .map(|p| (range_and_bearing(self.scenario, p.position).0, p.person, p.position))
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        candidates.truncate(MAX_BODIES);
        candidates.sort_by_key(|c| c.1);

        // anyone not in view this frame loses their skeleton
        self.active.retain(|person, _| candidates.iter().any(|c| c.1 == *person));

        let mut bodies = Vec::with_capacity(candidates.len());
        for (_, person, position) in candidates {
            let skeleton = match self.active.get(&person) {
                Some(id) => *id,
                None => {
                    let id = SkeletonId(self.next_id);
                    self.next_id += 1;
                    self.active.insert(person, id);
                    self.issued.insert(id, person);
                    id
                }
            };
            let height = self.scenario.person(person).map_or(1.7, |p| p.head_height_m);
            let mut head = exact_camera_coords(self.scenario, position, height);
            if let Some(noise) = &self.noise {
                for axis in head.iter_mut() {
                    *axis += noise.sample(&mut self.rng);
                }
            }
            bodies.push(Body { skeleton, head });
        }
        bodies.sort_by_key(|b| b.skeleton);
        SkeletonFrame {
            frame,
            t: frame_time(frame),
            bodies,
        }
    }

    /// Ground truth: which person each issued skeleton belonged to.
    pub fn skeleton_owners(&self) -> &BTreeMap<SkeletonId, PersonId> {
        &self.issued
    }

    pub fn into_skeleton_owners(self) -> BTreeMap<SkeletonId, PersonId> {
        self.issued
    }
}
