use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Topology, Vec3};
use crate::real::{Dual, Real};

/// Identifiable contact parameters plus the (fixed) cable constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactParams {
    /// Coulomb friction between end caps and ground.
    pub mu: f64,
    /// Coefficient of restitution.
    pub epsilon: f64,
    /// Baumgarte stabilization coefficient.
    pub beta: f64,
    /// Actuated-cable stiffness, N/m.
    pub stiffness: f64,
    /// Actuated-cable damping, N·s/m.
    pub damping: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self { mu: 0.5, epsilon: 0.2, beta: 0.3, stiffness: 1.0e4, damping: 20.0 }
    }
}

/// Lower bound kept on `beta` when projecting into the valid box.
pub const BETA_FLOOR: f64 = 1e-6;

impl ContactParams {
    pub fn with_theta(self, mu: f64, epsilon: f64, beta: f64) -> Self {
        Self { mu, epsilon, beta, ..self }
    }

    pub fn theta(&self) -> [f64; 3] {
        [self.mu, self.epsilon, self.beta]
    }

    pub fn set_theta(&mut self, t: [f64; 3]) {
        self.mu = t[0];
        self.epsilon = t[1];
        self.beta = t[2];
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu >= 0.0
            && (0.0..=1.0).contains(&self.epsilon)
            && self.beta > 0.0
            && self.beta <= 1.0
            && self.stiffness > 0.0
            && self.damping >= 0.0
            && self.theta().iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("contact parameters out of range: {self:?}")))
        }
    }

    /// Clamp `(mu, epsilon, beta)` into `mu ≥ 0, epsilon ∈ [0,1], beta ∈ (0,1]`.
    pub fn projected(mut self) -> Self {
        self.mu = self.mu.max(0.0);
        self.epsilon = self.epsilon.clamp(0.0, 1.0);
        self.beta = self.beta.clamp(BETA_FLOOR, 1.0);
        self
    }
}

/// `(mu, epsilon, beta)` lifted into a scalar type that may carry tangents.
#[derive(Debug, Clone, Copy)]
pub struct Theta<R> {
    pub mu: R,
    pub epsilon: R,
    pub beta: R,
}

impl Theta<f64> {
    pub fn primal(cp: &ContactParams) -> Self {
        Self { mu: cp.mu, epsilon: cp.epsilon, beta: cp.beta }
    }
}

impl Theta<Dual<3>> {
    /// Seed lanes 0, 1, 2 with `mu`, `epsilon`, `beta`.
    pub fn seeded(cp: &ContactParams) -> Self {
        Self {
            mu: Dual::variable(cp.mu, 0),
            epsilon: Dual::variable(cp.epsilon, 1),
            beta: Dual::variable(cp.beta, 2),
        }
    }
}

impl<R: Real> Theta<R> {
    pub fn lift(cp: &ContactParams) -> Self {
        Self { mu: R::cst(cp.mu), epsilon: R::cst(cp.epsilon), beta: R::cst(cp.beta) }
    }
}

/// Newtonian constants and integrator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BodyParams {
    pub rod_mass: f64,
    /// Transverse principal inertia of a rod about its center.
    pub rod_inertia: f64,
    /// Gravity vector, m/s². Tilting it emulates an incline.
    pub gravity: Vec3,
    pub dt: f64,
    pub passive_rest_length: f64,
    pub passive_stiffness: f64,
    pub passive_damping: f64,
    /// Maximum rest-length rate of a motor, m/s.
    pub motor_speed: f64,
    pub contact_slop: f64,
    /// Gaps below this are treated as potential contacts.
    pub speculative_margin: f64,
    /// Approach speeds below this get no bounce, m/s. Keeps resting caps
    /// from chattering on the velocity gravity adds each step.
    pub restitution_threshold: f64,
    pub solver_iterations: usize,
}

impl Default for BodyParams {
    fn default() -> Self {
        let rod_mass = 0.3;
        let rod_length: f64 = 0.35;
        Self {
            rod_mass,
            rod_inertia: rod_mass * rod_length * rod_length / 12.0,
            gravity: Vec3::new(0.0, 0.0, -9.81),
            dt: 1e-3,
            passive_rest_length: 0.16,
            passive_stiffness: 100.0,
            passive_damping: 2.0,
            motor_speed: 0.1,
            contact_slop: 1e-4,
            speculative_margin: 0.01,
            restitution_threshold: 0.05,
            solver_iterations: 10,
        }
    }
}

impl BodyParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.rod_mass,
            self.rod_inertia,
            self.dt,
            self.passive_rest_length,
            self.passive_stiffness,
            self.motor_speed,
            self.contact_slop,
            self.speculative_margin,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || self.dt > 0.01 || self.solver_iterations == 0 {
            return Err(Error::InvalidArgument(format!("body parameters out of range: {self:?}")));
        }
        if self.passive_damping < 0.0 || !self.gravity.is_finite() || !(self.restitution_threshold >= 0.0) {
            return Err(Error::InvalidArgument("passive damping and gravity must be valid".into()));
        }
        Ok(())
    }
}

/// Topology plus body constants: everything about the robot that is not a
/// contact parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Robot {
    pub topology: Topology,
    pub body: BodyParams,
}

impl Robot {
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.body.validate()
    }
}
