use serde::{Deserialize, Serialize};

use crate::geometry::{UnitQuat, Vec3, ACTUATED_COUNT, ROD_COUNT};
use crate::real::{Dual, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RodState<R = f64> {
    pub position: Vec3<R>,
    pub orientation: UnitQuat<R>,
    pub lin_vel: Vec3<R>,
    pub ang_vel: Vec3<R>,
}

impl<R: Real> RodState<R> {
    /// World direction of the rod's local z axis (end 0 lies along +axis).
    #[inline]
    pub fn axis(&self) -> Vec3<R> {
        self.orientation.rotate(Vec3::new(R::zero(), R::zero(), R::one()))
    }

    /// Velocity of a body-fixed point at world offset `arm` from the center.
    #[inline]
    pub fn point_velocity(&self, arm: Vec3<R>) -> Vec3<R> {
        self.lin_vel + self.ang_vel.cross(arm)
    }

    pub fn lift(rod: &RodState<f64>) -> Self {
        Self {
            position: Vec3::from_f64(rod.position),
            orientation: UnitQuat::from_f64(rod.orientation),
            lin_vel: Vec3::from_f64(rod.lin_vel),
            ang_vel: Vec3::from_f64(rod.ang_vel),
        }
    }

    pub fn value(&self) -> RodState<f64> {
        RodState {
            position: self.position.value(),
            orientation: self.orientation.value(),
            lin_vel: self.lin_vel.value(),
            ang_vel: self.ang_vel.value(),
        }
    }
}

/// Full dynamic state: the rods plus the current rest lengths of the
/// actuated cables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState<R = f64> {
    pub rods: [RodState<R>; ROD_COUNT],
    pub rest_lengths: [f64; ACTUATED_COUNT],
    pub time: f64,
}

impl SystemState<f64> {
    pub fn at_rest(rods: [RodState; ROD_COUNT], rest_lengths: [f64; ACTUATED_COUNT]) -> Self {
        Self { rods, rest_lengths, time: 0.0 }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.rest_lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(crate::Error::InvalidArgument("rest lengths must be positive".into()));
        }
        if let Some(q) = crate::physics::first_non_finite(self) {
            return Err(crate::Error::IntegrationBlowup { quantity: q, time: self.time });
        }
        Ok(())
    }

    /// Kinetic energy of the rods (translational + transverse rotational).
    pub fn kinetic_energy(&self, mass: f64, inertia: f64) -> f64 {
        self.rods
            .iter()
            .map(|r| 0.5 * mass * r.lin_vel.norm_sq() + 0.5 * inertia * r.ang_vel.norm_sq())
            .sum()
    }
}

impl<R: Real> SystemState<R> {
    pub fn lift(s: &SystemState<f64>) -> Self {
        Self {
            rods: [RodState::lift(&s.rods[0]), RodState::lift(&s.rods[1]), RodState::lift(&s.rods[2])],
            rest_lengths: s.rest_lengths,
            time: s.time,
        }
    }

    pub fn primal(&self) -> SystemState<f64> {
        SystemState {
            rods: [self.rods[0].value(), self.rods[1].value(), self.rods[2].value()],
            rest_lengths: self.rest_lengths,
            time: self.time,
        }
    }
}

/// State with tangents along `(mu, epsilon, beta)`.
pub type SensitiveState = SystemState<Dual<3>>;

impl SensitiveState {
    /// Derivatives of every rod position component w.r.t. parameter `lane`
    /// (0 = mu, 1 = epsilon, 2 = beta).
    pub fn position_sensitivity(&self, lane: usize) -> [Vec3; ROD_COUNT] {
        let d = |v: &Vec3<Dual<3>>| Vec3::new(v.x.d[lane], v.y.d[lane], v.z.d[lane]);
        [d(&self.rods[0].position), d(&self.rods[1].position), d(&self.rods[2].position)]
    }
}

/// Target lengths for the six actuated tendons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub targets: [f64; ACTUATED_COUNT],
}

impl Control {
    pub fn new(targets: [f64; ACTUATED_COUNT]) -> Self {
        Self { targets }
    }

    /// Targets equal to the current rest lengths: motors hold still.
    pub fn hold(state: &SystemState) -> Self {
        Self { targets: state.rest_lengths }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.targets.iter().all(|t| *t > 0.0 && t.is_finite()) {
            Ok(())
        } else {
            Err(crate::Error::InvalidArgument("control targets must be positive".into()))
        }
    }
}
