//! Ground-truth scenario description: room, sensor poses, walkers and tags.
//!
//! Scenarios are TOML documents. Lengths are meters, times seconds, angles degrees.
//! See `scenarios/crossed_badges.toml` at the repository root for the canonical layout.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Floor;
use crate::ids::{AntennaId, PersonId, TagId};

pub mod presets;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub room: Room,
    #[serde(default)]
    pub kinect: KinectPose,
    /// Number of extra tags in the room that load the reader but are not enrolled for identification.
    #[serde(default)]
    pub background_tags: u32,
    /// Tag whose wearer is tracked for the target-tracking metric. Defaults to the first tag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_tag: Option<TagId>,
    pub antennas: Vec<Antenna>,
    pub persons: Vec<Person>,
    pub tags: Vec<Tag>,
}

fn default_duration() -> f64 {
    60.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for Room {
    fn default() -> Self {
        Self {
            x_min: -2.0,
            x_max: 2.0,
            z_min: 0.5,
            z_max: 4.5,
        }
    }
}

impl Room {
    pub fn contains(&self, p: Floor) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.z >= self.z_min && p.z <= self.z_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinectPose {
    /// (x, height, z)
    pub position: [f64; 3],
    pub tilt_deg: f64,
}

impl Default for KinectPose {
    fn default() -> Self {
        Self {
            position: [0.0, 2.0, 0.0],
            tilt_deg: 10.0,
        }
    }
}

impl KinectPose {
    pub fn floor(&self) -> Floor {
        Floor::new(self.position[0], self.position[2])
    }

    pub fn height(&self) -> f64 {
        self.position[1]
    }
}

/// Reader antenna, modeled at tag height so range geometry stays in the floor plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Antenna {
    pub id: AntennaId,
    pub position: Floor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Waypoint {
    pub t: f64,
    pub position: Floor,
}

impl Waypoint {
    pub fn new(t: f64, x: f64, z: f64) -> Self {
        Self {
            t,
            position: Floor::new(x, z),
        }
    }
}

impl From<[f64; 3]> for Waypoint {
    fn from([t, x, z]: [f64; 3]) -> Self {
        Waypoint::new(t, x, z)
    }
}

impl From<Waypoint> for [f64; 3] {
    fn from(w: Waypoint) -> Self {
        [w.t, w.position.x, w.position.z]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Person {
    pub id: PersonId,
    #[serde(default = "default_head_height")]
    pub head_height_m: f64,
    /// `[t, x, z]` triples with strictly increasing `t`.
    pub waypoints: Vec<Waypoint>,
}

fn default_head_height() -> f64 {
    1.7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tag {
    pub id: TagId,
    /// Wearer, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person: Option<PersonId>,
    /// Fixed floor position of an unworn tag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Floor>,
}

/// Maximum antennas one reader drives; more starves the per-antenna read rate.
pub const MAX_ANTENNAS: usize = 2;

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario fields are always representable in TOML")
    }

    /// Checks every scenario invariant; the error names the offending field.
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::validation("duration_s", "must be a positive number of seconds"));
        }
        let room = &self.room;
        if !(room.x_min < room.x_max && room.z_min < room.z_max) {
            return Err(Error::validation("room", "min bounds must be below max bounds"));
        }
        if !(0.0..90.0).contains(&self.kinect.tilt_deg) {
            return Err(Error::validation("kinect.tilt_deg", "must lie in [0, 90) degrees"));
        }
        if self.antennas.is_empty() {
            return Err(Error::validation("antennas", "at least one antenna is required"));
        }
        if self.antennas.len() > MAX_ANTENNAS {
            return Err(Error::validation(
                "antennas",
                format!("a reader drives at most {MAX_ANTENNAS} antennas"),
            ));
        }
        let mut seen = BTreeSet::new();
        for (i, a) in self.antennas.iter().enumerate() {
            if !seen.insert(a.id) {
                return Err(Error::validation(format!("antennas[{i}].id"), format!("duplicate antenna id {}", a.id)));
            }
        }

        let mut person_ids = BTreeSet::new();
        for (i, p) in self.persons.iter().enumerate() {
            if !person_ids.insert(p.id) {
                return Err(Error::validation(format!("persons[{i}].id"), format!("duplicate person id {}", p.id)));
            }
            if !(p.head_height_m > 0.0 && p.head_height_m.is_finite()) {
                return Err(Error::validation(format!("persons[{i}].head_height_m"), "must be positive"));
            }
            if p.waypoints.is_empty() {
                return Err(Error::validation(format!("persons[{i}].waypoints"), "at least one waypoint is required"));
            }
            for (j, w) in p.waypoints.iter().enumerate() {
                if !w.t.is_finite() || w.t < 0.0 {
                    return Err(Error::validation(format!("persons[{i}].waypoints[{j}].t"), "must be a non-negative time"));
                }
                if j > 0 && w.t <= p.waypoints[j - 1].t {
                    return Err(Error::validation(
                        format!("persons[{i}].waypoints[{j}].t"),
                        "waypoint times must be strictly increasing",
                    ));
                }
                if !room.contains(w.position) {
                    return Err(Error::validation(format!("persons[{i}].waypoints[{j}]"), "position lies outside the room"));
                }
            }
        }

        let mut tag_ids = BTreeSet::new();
        let mut wearers = BTreeSet::new();
        for (i, t) in self.tags.iter().enumerate() {
            if !tag_ids.insert(t.id) {
                return Err(Error::validation(format!("tags[{i}].id"), format!("duplicate tag id {}", t.id)));
            }
            match (t.person, t.position) {
                (Some(p), None) => {
                    if !person_ids.contains(&p) {
                        return Err(Error::validation(format!("tags[{i}].person"), format!("no person with id {p}")));
                    }
                    if !wearers.insert(p) {
                        return Err(Error::validation(format!("tags[{i}].person"), format!("person {p} already wears a tag")));
                    }
                }
                (None, Some(pos)) => {
                    if !room.contains(pos) {
                        return Err(Error::validation(format!("tags[{i}].position"), "position lies outside the room"));
                    }
                }
                (Some(_), Some(_)) => {
                    return Err(Error::validation(format!("tags[{i}]"), "a worn tag must not also have a fixed position"));
                }
                (None, None) => {
                    return Err(Error::validation(format!("tags[{i}]"), "an unworn tag needs a fixed position"));
                }
            }
        }
        if let Some(target) = self.target_tag {
            if !tag_ids.contains(&target) {
                return Err(Error::validation("target_tag", format!("no tag with id {target}")));
            }
        }
        Ok(())
    }

    pub fn person(&self, id: PersonId) -> Option<&Person> {
        self.persons.iter().find(|p| p.id == id)
    }

    pub fn tag_of(&self, person: PersonId) -> Option<TagId> {
        self.tags.iter().find(|t| t.person == Some(person)).map(|t| t.id)
    }

    pub fn wearer_of(&self, tag: TagId) -> Option<PersonId> {
        self.tags.iter().find(|t| t.id == tag).and_then(|t| t.person)
    }

    pub fn target(&self) -> Option<TagId> {
        self.target_tag.or_else(|| self.tags.first().map(|t| t.id))
    }

    pub fn tilt_rad(&self) -> f64 {
        self.kinect.tilt_deg.to_radians()
    }

    /// Keeps the first `n` antennas.
    pub fn with_antenna_count(mut self, n: usize) -> Result<Self> {
        if n == 0 || n > self.antennas.len() {
            return Err(Error::validation(
                "antennas",
                format!("requested {n} antennas but the scenario defines {}", self.antennas.len()),
            ));
        }
        self.antennas.truncate(n);
        Ok(self)
    }

    /// Pads the room with background tags so the reader sees `total` tags in all.
    pub fn with_total_tags(mut self, total: u32) -> Result<Self> {
        let enrolled = self.tags.len() as u32;
        if total < enrolled {
            return Err(Error::validation(
                "tags",
                format!("requested {total} tags but the scenario enrolls {enrolled}"),
            ));
        }
        self.background_tags = total - enrolled;
        Ok(self)
    }

    pub fn total_tags(&self) -> usize {
        self.tags.len() + self.background_tags as usize
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_toml_str(&text)
}
