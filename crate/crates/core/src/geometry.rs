use serde::{Deserialize, Serialize};

/// A point (or vector) in the floor plane, meters. `x` runs across the room, `z` away from the camera.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Floor {
    pub x: f64,
    pub z: f64,
}

impl Floor {
    pub const ZERO: Floor = Floor { x: 0.0, z: 0.0 };

    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn dot(self, other: Floor) -> f64 {
        self.x * other.x + self.z * other.z
    }

    pub fn distance(self, other: Floor) -> f64 {
        (self - other).norm()
    }

    pub fn scale(self, k: f64) -> Floor {
        Floor::new(self.x * k, self.z * k)
    }
}

impl std::ops::Add for Floor {
    type Output = Floor;
    fn add(self, rhs: Floor) -> Floor {
        Floor::new(self.x + rhs.x, self.z + rhs.z)
    }
}

impl std::ops::Sub for Floor {
    type Output = Floor;
    fn sub(self, rhs: Floor) -> Floor {
        Floor::new(self.x - rhs.x, self.z - rhs.z)
    }
}

impl From<[f64; 2]> for Floor {
    fn from([x, z]: [f64; 2]) -> Self {
        Floor { x, z }
    }
}

impl From<Floor> for [f64; 2] {
    fn from(p: Floor) -> Self {
        [p.x, p.z]
    }
}

/// Wraps an angle to `[0, 2π)`.
pub fn wrap_2pi(angle: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = angle.rem_euclid(tau);
    // rem_euclid can round up to exactly tau for tiny negative inputs
    if r >= tau {
        0.0
    } else {
        r
    }
}

/// Wraps an angle difference to `(-π, π]`.
pub fn wrap_pi(angle: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let r = pi - (pi - angle).rem_euclid(std::f64::consts::TAU);
    if r <= -pi {
        r + std::f64::consts::TAU
    } else {
        r
    }
}
