use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaits::{apply_symmetry, make_gait, simulate_gait, GaitSettings, OrientationClass, Primitive, PrimitiveKind, PrimitiveSpec};
use crate::geometry::{extract_pose2, transform_state, Pose2, Vec3};
use crate::physics::{ContactParams, Robot};
use crate::planner::{point_blocked, Rect, Scenario};
use crate::SystemState;

/// How a primitive is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum Executor {
    /// The nominal delta, then Gaussian noise: `sigma_xy_frac` times the
    /// primitive's translation on each of x and y, and `sigma_theta` on the
    /// heading.
    DeltaNoise { sigma_xy_frac: f64, sigma_theta: f64 },
    /// A physics run of the primitive's gait under the true contact
    /// parameters held by the [`PhysicsWorld`].
    PhysicsInLoop,
}

impl Default for Executor {
    fn default() -> Self {
        Executor::DeltaNoise { sigma_xy_frac: 0.1, sigma_theta: 0.09 }
    }
}

impl Executor {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Executor::DeltaNoise { sigma_xy_frac, sigma_theta } if !(sigma_xy_frac >= 0.0 && sigma_theta >= 0.0) => {
                Err(Error::InvalidArgument(format!("executor noise must be non-negative: {self:?}")))
            }
            _ => Ok(()),
        }
    }
}

/// Everything a physics-backed executor needs: the robot, the true contact
/// parameters, gait settings and a resting state settled under those
/// parameters, registered so that its planar pose is the identity.
#[derive(Debug, Clone)]
pub struct PhysicsWorld {
    pub robot: Robot,
    pub truth: ContactParams,
    pub gaits: GaitSettings,
    pub rest: SystemState,
}

impl PhysicsWorld {
    pub fn new(robot: Robot, truth: ContactParams, gaits: GaitSettings) -> Result<Self> {
        let settled = crate::gaits::settle_rest_state(&truth, &robot, &gaits)?;
        let pose = extract_pose2(&settled, &robot.topology)?;
        let rest = transform_state(&settled, &pose.inverse());
        Ok(Self { robot, truth, gaits, rest })
    }
}

/// Environmental effects layered on top of execution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind")]
pub enum Disturbance {
    #[default]
    None,
    /// Once, when executing step `trigger_step`, the robot is displaced by
    /// `height` in a random direction and its heading randomized.
    Drop { height: f64, trigger_step: usize },
    /// Slope of `angle` rad whose downhill direction is `downhill` rad in the
    /// world frame.
    Incline { angle: f64, downhill: f64 },
    /// Inside `region`, translations shrink by `delta_scale` and pick up
    /// extra Gaussian noise of `sigma` m per axis.
    Granular { region: Rect, delta_scale: f64, sigma: f64 },
}

/// Downhill drift speed on an 8° slope, m/s.
pub const INCLINE_DRIFT_SPEED: f64 = 0.02;
const INCLINE_REFERENCE: f64 = 8.0 * PI / 180.0;

impl Disturbance {
    pub fn drop_default() -> Self {
        Disturbance::Drop { height: 0.37, trigger_step: 1 }
    }

    /// The 8° ramp climbed along +x: downhill points back along -x.
    pub fn incline_default() -> Self {
        Disturbance::Incline { angle: INCLINE_REFERENCE, downhill: PI }
    }

    /// Loose ground across the middle of the default course, where both
    /// obstacles sit.
    pub fn granular_default() -> Self {
        Disturbance::Granular { region: Rect::new(1.0, -1.5, 3.0, 1.5), delta_scale: 0.5, sigma: 0.02 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Disturbance::None => true,
            Disturbance::Drop { height, .. } => height > 0.0,
            Disturbance::Incline { angle, downhill } => angle > 0.0 && angle < PI / 4.0 && downhill.is_finite(),
            Disturbance::Granular { region, delta_scale, sigma } => {
                region.width() > 0.0 && region.height() > 0.0 && delta_scale >= 0.0 && sigma >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid disturbance: {self:?}")))
        }
    }
}

/// The spec whose gait is the Left/Right label swap of `spec`'s.
pub fn mirror_partner(spec: &PrimitiveSpec) -> PrimitiveSpec {
    let kind = match spec.kind {
        PrimitiveKind::ForwardRoll => PrimitiveKind::ForwardRoll,
        PrimitiveKind::Counterclockwise => PrimitiveKind::Clockwise,
        PrimitiveKind::Clockwise => PrimitiveKind::Counterclockwise,
    };
    let (left_max, right_max) = match spec.kind {
        PrimitiveKind::ForwardRoll => (spec.right_max, spec.left_max),
        _ => (spec.left_max, spec.right_max),
    };
    let id = PrimitiveSpec::table()
        .iter()
        .find(|s| s.kind == kind && s.left_max == left_max && s.right_max == right_max)
        .map_or(spec.id, |s| s.id);
    PrimitiveSpec { id, kind, left_max, right_max }
}

fn gauss<G: Rng>(rng: &mut G, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("sigma checked non-negative").sample(rng)
}

/// Carry out one primitive from the true pose `pose`.
///
/// `step_index` counts executed primitives from 0 and only matters for the
/// drop. `mirrored` runs the label-swapped gait (physics only; the noisy
/// replay already executes the intended motion). The scenario bounds where
/// a drop may land.
#[allow(clippy::too_many_arguments)]
pub fn execute_primitive<G: Rng>(
    pose: &Pose2,
    prim: &Primitive,
    executor: &Executor,
    disturbance: &Disturbance,
    step_index: usize,
    mirrored: bool,
    world: Option<&PhysicsWorld>,
    scenario: &Scenario,
    exec_rng: &mut G,
    dist_rng: &mut G,
) -> Result<Pose2> {
    let granular = match *disturbance {
        Disturbance::Granular { region, delta_scale, sigma } if region.contains(pose.x, pose.y) => {
            Some((delta_scale, sigma))
        }
        _ => None,
    };
    let mut next = match *executor {
        Executor::DeltaNoise { sigma_xy_frac, sigma_theta } => {
            let mut delta = prim.delta;
            if let Some((scale, _)) = granular {
                delta.x *= scale;
                delta.y *= scale;
            }
            let moved = pose.compose(&delta);
            let s = sigma_xy_frac * delta.translation_norm();
            let (nx, ny, nth) = (gauss(exec_rng, s), gauss(exec_rng, s), gauss(exec_rng, sigma_theta));
            Pose2::new(moved.x + nx, moved.y + ny, moved.theta + nth)
        }
        Executor::PhysicsInLoop => {
            let world = world.ok_or_else(|| Error::InvalidArgument("physics execution needs a world".into()))?;
            let after = run_physics(pose, prim, disturbance, mirrored, world)?;
            match granular {
                Some((scale, _)) => {
                    let d = pose.between(&after);
                    pose.compose(&Pose2::new(d.x * scale, d.y * scale, d.theta))
                }
                None => after,
            }
        }
    };
    if let Some((_, sigma)) = granular {
        next = Pose2::new(next.x + gauss(dist_rng, sigma), next.y + gauss(dist_rng, sigma), next.theta);
    }
    match *disturbance {
        Disturbance::Incline { angle, downhill } if matches!(executor, Executor::DeltaNoise { .. }) => {
            let drift = prim.duration * INCLINE_DRIFT_SPEED * angle.sin() / INCLINE_REFERENCE.sin();
            next = Pose2::new(next.x + drift * downhill.cos(), next.y + drift * downhill.sin(), next.theta);
        }
        Disturbance::Drop { height, trigger_step } if step_index == trigger_step => {
            next = drop_landing(&next, height, scenario, dist_rng);
        }
        _ => {}
    }
    Ok(next)
}

/// Seeded landing point `height` away from `pose` with a random heading.
/// Landings inside obstacles or outside the boundary are redrawn; after 64
/// attempts the robot stays where it was.
fn drop_landing<G: Rng>(pose: &Pose2, height: f64, scenario: &Scenario, rng: &mut G) -> Pose2 {
    for _ in 0..64 {
        let dir = rng.random_range(-PI..PI);
        let heading = PI - rng.random_range(0.0..2.0 * PI);
        let (x, y) = (pose.x + height * dir.cos(), pose.y + height * dir.sin());
        if !point_blocked(x, y, scenario) {
            return Pose2::new(x, y, heading);
        }
    }
    *pose
}

fn run_physics(
    pose: &Pose2,
    prim: &Primitive,
    disturbance: &Disturbance,
    mirrored: bool,
    world: &PhysicsWorld,
) -> Result<Pose2> {
    let mut robot = world.robot.clone();
    if let Disturbance::Incline { angle, downhill } = *disturbance {
        let g = robot.body.gravity.norm();
        let s = angle.sin();
        robot.body.gravity = Vec3::new(g * s * downhill.cos(), g * s * downhill.sin(), -g * angle.cos());
    }
    let topo = &robot.topology;
    let mut gait = make_gait(&prim.spec, &world.gaits.templates, &world.gaits.limits, topo);
    if mirrored {
        gait = apply_symmetry(&gait, OrientationClass::Mirror, topo);
    }
    // the same procedure that compiled the library, started from the
    // resting body moved to `pose`
    let start = transform_state(&world.rest, pose);
    let out = simulate_gait(&gait, &start, &world.truth, &robot, &world.gaits)?;
    Ok(pose.compose(&out.delta))
}
