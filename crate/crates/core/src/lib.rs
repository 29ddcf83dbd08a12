//! Simulation, contact-parameter identification and navigation for a 3-bar
//! tensegrity robot.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! - [`physics`]: differentiable forward dynamics (rods, cables, contact).
//! - [`sysid`]: gradient-descent fitting of `(mu, epsilon, beta)` to
//!   recorded end-cap trajectories.
//! - [`gaits`]: tendon PID, target-shape gaits, and compilation of gaits into
//!   SE(2) motion primitives.
//! - [`planner`]: A* over SE(2) with primitive edges and KD-tree pruning of
//!   near-duplicate poses.
//! - [`navigator`]: closed-loop perceive/plan/act with disturbance models.

pub mod error;
pub mod gaits;
pub mod navigator;
pub mod geometry;
pub mod physics;
pub mod planner;
pub mod real;
pub mod sysid;

pub use error::{Error, NoPathReason, Result};
pub use geometry::{se2_compose, Pose2, Topology, Vec3};
pub use physics::{BodyParams, ContactParams, Control, Robot, SystemState};
