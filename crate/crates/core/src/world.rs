//! Ground-truth queries over a scenario.

use crate::error::{Error, Result};
use crate::geometry::Floor;
use crate::ids::PersonId;
use crate::scenario::{Person, Scenario};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonState {
    pub person: PersonId,
    pub position: Floor,
    pub velocity: Floor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: f64,
    pub persons: Vec<PersonState>,
}

impl WorldState {
    pub fn person(&self, id: PersonId) -> Option<&PersonState> {
        self.persons.iter().find(|p| p.person == id)
    }
}

impl Person {
    /// Position and velocity on the piecewise-linear path. Velocity is right-continuous:
    /// at a waypoint it is the slope of the segment that starts there. Outside the
    /// waypoint span the person stands still at the nearest end.
    pub fn kinematics_at(&self, t: f64) -> (Floor, Floor) {
        let w = &self.waypoints;
        let first = w[0];
        if t < first.t {
            return (first.position, Floor::ZERO);
        }
        // index of the last waypoint with time <= t
        let i = w.partition_point(|p| p.t <= t) - 1;
        if i + 1 == w.len() {
            return (w[i].position, Floor::ZERO);
        }
        let (a, b) = (w[i], w[i + 1]);
        let velocity = (b.position - a.position).scale(1.0 / (b.t - a.t));
        let position = a.position + velocity.scale(t - a.t);
        (position, velocity)
    }

    pub fn path_length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|s| s[0].position.distance(s[1].position))
            .sum()
    }
}

pub fn world_state_at(scenario: &Scenario, t: f64) -> Result<WorldState> {
    if !(0.0..=scenario.duration_s).contains(&t) {
        return Err(Error::TimeOutOfRange {
            t,
            duration: scenario.duration_s,
        });
    }
    let persons = scenario
        .persons
        .iter()
        .map(|p| {
            let (position, velocity) = p.kinematics_at(t);
            PersonState {
                person: p.id,
                position,
                velocity,
            }
        })
        .collect();
    Ok(WorldState { t, persons })
}

/// Signed rate at which `pos` closes on `antenna`; positive when approaching.
pub fn true_radial_velocity(pos: Floor, vel: Floor, antenna: Floor) -> Result<f64> {
    let offset = pos - antenna;
    let range = offset.norm();
    if range == 0.0 {
        return Err(Error::CoincidentPosition);
    }
    Ok(-offset.dot(vel) / range)
}
