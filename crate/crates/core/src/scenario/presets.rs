//! Built-in scenarios used by the sweeps, the examples and the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Antenna, KinectPose, Person, Room, Scenario, Tag, Waypoint};
use crate::geometry::Floor;
use crate::ids::{AntennaId, PersonId, TagId};
use crate::rng::{mix, streams};

const CROSSED_BADGES: &str = include_str!("../../../../scenarios/crossed_badges.toml");

/// Canonical two-walker room shipped as `scenarios/crossed_badges.toml`.
pub fn crossed_badges() -> Scenario {
    Scenario::from_toml_str(CROSSED_BADGES).expect("bundled scenario is valid")
}

/// Wall antennas facing each other across the room.
pub fn wall_antennas() -> Vec<Antenna> {
    vec![
        Antenna {
            id: AntennaId(1),
            position: Floor::new(-2.0, 2.5),
        },
        Antenna {
            id: AntennaId(2),
            position: Floor::new(2.0, 2.5),
        },
    ]
}

fn empty_room(duration_s: f64, seed: u64) -> Scenario {
    Scenario {
        duration_s,
        rng_seed: seed,
        room: Room::default(),
        kinect: KinectPose::default(),
        background_tags: 0,
        target_tag: None,
        antennas: wall_antennas(),
        persons: Vec::new(),
        tags: Vec::new(),
    }
}

fn worn_tags(n: u32) -> Vec<Tag> {
    (1..=n)
        .map(|i| Tag {
            id: TagId(i),
            person: Some(PersonId(i)),
            position: None,
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Wander {
    speed: (f64, f64),
    pause_prob: f64,
    pause_s: (f64, f64),
    /// Chance that the next waypoint is drawn from the whole room rather than the camera's view.
    roam_prob: f64,
}

fn sample_point(rng: &mut ChaCha8Rng, room: &Room, roam_prob: f64) -> Floor {
    if !rng.random_bool(roam_prob) {
        // inside the camera cone with a margin: straight segments between such points stay visible
        let z = rng.random_range(1.2..4.0);
        let half = 0.6 * z * 35f64.to_radians().tan();
        Floor::new(rng.random_range(-half..half), z)
    } else {
        Floor::new(
            rng.random_range(room.x_min + 0.1..room.x_max - 0.1),
            rng.random_range(room.z_min + 0.1..room.z_max - 0.1),
        )
    }
}

fn wander_path(rng: &mut ChaCha8Rng, room: &Room, horizon: f64, style: Wander) -> Vec<Waypoint> {
    let mut at = sample_point(rng, room, style.roam_prob);
    let mut t = 0.0;
    let mut out = vec![Waypoint { t, position: at }];
    while t <= horizon {
        if rng.random_bool(style.pause_prob) {
            t += rng.random_range(style.pause_s.0..style.pause_s.1);
            out.push(Waypoint { t, position: at });
        }
        let next = loop {
            let p = sample_point(rng, room, style.roam_prob);
            if p.distance(at) > 0.5 {
                break p;
            }
        };
        t += next.distance(at) / rng.random_range(style.speed.0..style.speed.1);
        at = next;
        out.push(Waypoint { t, position: at });
    }
    out
}

fn walkers(n: u32, duration_s: f64, seed: u64, style: Wander) -> Scenario {
    let mut s = empty_room(duration_s, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, &[streams::SCENARIO, n as u64]));
    s.persons = (1..=n)
        .map(|i| Person {
            id: PersonId(i),
            head_height_m: rng.random_range(1.55..1.90),
            waypoints: wander_path(&mut rng, &s.room, duration_s + 1.0, style),
        })
        .collect();
    s.tags = worn_tags(n);
    s
}

/// One tagged walker who keeps moving and never leaves the camera's view.
pub fn single_walker(duration_s: f64, seed: u64) -> Scenario {
    in_view_walkers(1, duration_s, seed)
}

/// `n` tagged walkers moving continuously inside the camera's view.
pub fn in_view_walkers(n: u32, duration_s: f64, seed: u64) -> Scenario {
    walkers(
        n,
        duration_s,
        seed,
        Wander {
            speed: (0.6, 1.3),
            pause_prob: 0.0,
            pause_s: (0.0, 1.0),
            roam_prob: 0.0,
        },
    )
}

/// `n` tagged walkers who mostly stay in the camera's view but now and then head for the
/// rest of the room, and who stop from time to time.
pub fn random_walkers(n: u32, duration_s: f64, seed: u64) -> Scenario {
    roaming_walkers(n, duration_s, seed, 0.3)
}

/// Like [`random_walkers`] with an explicit chance per waypoint of leaving the view.
pub fn roaming_walkers(n: u32, duration_s: f64, seed: u64, roam_prob: f64) -> Scenario {
    walkers(
        n,
        duration_s,
        seed,
        Wander {
            speed: (0.5, 1.5),
            pause_prob: 0.3,
            pause_s: (1.0, 4.0),
            roam_prob,
        },
    )
}

fn shuttle(duration_s: f64, from: Floor, to: Floor, speed: f64) -> Vec<Waypoint> {
    let leg = from.distance(to) / speed;
    let legs = (duration_s / leg).ceil() as usize + 1;
    (0..=legs)
        .map(|k| Waypoint {
            t: k as f64 * leg,
            position: if k % 2 == 0 { from } else { to },
        })
        .collect()
}

/// Two tagged walkers whose floor paths are reflections of each other across the line
/// joining the antennas, so both antennas see identical ranges for the two of them.
pub fn mirror_pair(duration_s: f64) -> Scenario {
    let mut s = empty_room(duration_s, 0);
    let baseline = s.antennas[0].position.z;
    let near = 1.7;
    let far = 2.0 * baseline - near;
    s.persons = vec![
        Person {
            id: PersonId(1),
            head_height_m: 1.70,
            waypoints: shuttle(duration_s, Floor::new(-0.9, near), Floor::new(0.9, near), 0.8),
        },
        Person {
            id: PersonId(2),
            head_height_m: 1.70,
            waypoints: shuttle(duration_s, Floor::new(-0.9, far), Floor::new(0.9, far), 0.8),
        },
    ];
    s.tags = worn_tags(2);
    s
}

/// Single antenna straight ahead; the tagged walker approaches it head-on at 1 m/s.
pub fn radial_approach() -> Scenario {
    let mut s = empty_room(3.0, 0);
    s.antennas = vec![Antenna {
        id: AntennaId(1),
        position: Floor::new(0.0, 4.5),
    }];
    s.persons = vec![Person {
        id: PersonId(1),
        head_height_m: 1.75,
        waypoints: vec![Waypoint::new(0.0, 0.0, 0.9), Waypoint::new(3.2, 0.0, 4.1)],
    }];
    s.tags = worn_tags(1);
    s
}

/// An unworn enrolled tag on a shelf, a few background tags and one untagged walker.
pub fn stationary_tag_room(duration_s: f64, total_tags: u32, seed: u64) -> Scenario {
    let mut s = in_view_walkers(1, duration_s, seed);
    s.tags = vec![Tag {
        id: TagId(1),
        person: None,
        position: Some(Floor::new(0.8, 2.0)),
    }];
    s.background_tags = total_tags.saturating_sub(1);
    s
}
