use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{end_cap_positions, pose2_from_caps, transform_state, Pose2, Vec3};
use crate::physics::Robot;
use crate::SystemState;

/// How the robot's pose is estimated after each primitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum Observer {
    GroundTruth,
    /// Gaussian noise added to the true pose.
    NoisyPose { sigma_xy: f64, sigma_theta: f64 },
    /// Gaussian noise added to every cap position; the pose is then
    /// recovered from the caps alone, so any twist is lost.
    EndCaps { sigma: f64 },
}

impl Default for Observer {
    fn default() -> Self {
        Observer::NoisyPose { sigma_xy: 0.01, sigma_theta: 0.02 }
    }
}

impl Observer {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Observer::GroundTruth => true,
            Observer::NoisyPose { sigma_xy, sigma_theta } => sigma_xy >= 0.0 && sigma_theta >= 0.0,
            Observer::EndCaps { sigma } => sigma >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("observer noise must be non-negative: {self:?}")))
        }
    }
}

fn gauss<G: Rng>(rng: &mut G, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("sigma checked non-negative").sample(rng)
}

/// Estimate the pose of a robot whose true planar pose is `truth`.
///
/// `body` is the robot's resting state at the origin; it is only needed for
/// [`Observer::EndCaps`], which places it at `truth` to obtain caps.
pub fn observe<G: Rng>(
    truth: &Pose2,
    observer: &Observer,
    body: Option<(&SystemState, &Robot)>,
    rng: &mut G,
) -> Result<Pose2> {
    match *observer {
        Observer::GroundTruth => Ok(*truth),
        Observer::NoisyPose { sigma_xy, sigma_theta } => {
            let dx = gauss(rng, sigma_xy);
            let dy = gauss(rng, sigma_xy);
            let dth = gauss(rng, sigma_theta);
            Ok(Pose2::new(truth.x + dx, truth.y + dy, truth.theta + dth))
        }
        Observer::EndCaps { sigma } => {
            let (rest, robot) =
                body.ok_or_else(|| Error::InvalidArgument("cap observation needs a resting body".into()))?;
            let placed = transform_state(rest, truth);
            let mut caps = end_cap_positions(&placed, &robot.topology);
            for c in &mut caps {
                *c += Vec3::new(gauss(rng, sigma), gauss(rng, sigma), gauss(rng, sigma));
            }
            pose2_from_caps(&caps, &robot.topology)
        }
    }
}
