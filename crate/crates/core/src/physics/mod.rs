//! Forward dynamics of the 3-bar tensegrity: rigid rods, tension-only
//! cables, and impulse-based end-cap contact with the ground plane `z = 0`.
//!
//! Everything is generic over [`crate::real::Real`] so that the same code
//! path produces derivatives w.r.t. the contact parameters in forward mode.

mod assembly;
mod contact;
mod dynamics;
mod params;
mod state;

pub use assembly::{nominal_state, quat_from_z};
pub use contact::{resolve_contacts, resolve_contacts_with_velocities, ContactImpulse};
pub(crate) use dynamics::first_non_finite;
pub use dynamics::{
    actuate, actuated_lengths, cable_force, mechanical_energy, rollout, rollout_with_gradient, step,
    step_with_gradient, ControlSegment, Snapshot, Trajectory,
};
pub use params::{BodyParams, ContactParams, Robot, Theta, BETA_FLOOR};
pub use state::{Control, RodState, SensitiveState, SystemState};
