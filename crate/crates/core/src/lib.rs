//! People tracking and identification from a depth camera and a frequency-hopping RFID
//! reader: simulation of both sensors, velocity estimation, and velocity-sequence matching.

pub mod config;
pub mod depth;
pub mod doppler;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod ids;
pub mod kinect;
pub mod logs;
pub mod metrics;
pub mod rfid;
pub mod rng;
pub mod runner;
pub mod scenario;
pub mod timebase;
pub mod world;

pub use error::{Error, Result};
