//! Identification of the contact parameters `(mu, epsilon, beta)` from
//! recorded end-cap positions.
//!
//! Every loss evaluation rolls the simulator out over the whole trajectory
//! from the recorded start state and compares caps only at the end of each
//! gait cycle. Derivatives come from the forward-mode rollout, so one pass
//! yields the loss and its full gradient.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaits::Gait;
use crate::geometry::{end_cap_positions, Vec3, CAP_COUNT};
use crate::physics::{rollout, rollout_with_gradient, ContactParams, ControlSegment, Robot, SystemState};
use crate::real::Real;

pub type Caps = [Vec3; CAP_COUNT];

/// Caps observed at the end of one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapObservation {
    pub cycle: usize,
    pub caps: Caps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrajectory {
    pub start_state: SystemState,
    pub controls: Vec<ControlSegment>,
    pub observations: Vec<CapObservation>,
    /// For each cycle, the index of the control segment that ends it.
    pub cycle_boundaries: Vec<usize>,
}

impl TrainingTrajectory {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        self.start_state.validate()?;
        if self.controls.is_empty() || self.cycle_boundaries.is_empty() {
            return bad("trajectory needs at least one control and one cycle");
        }
        if self.controls.iter().any(|c| c.control.validate().is_err() || !(c.duration > 0.0)) {
            return bad("controls need positive targets and durations");
        }
        if self.cycle_boundaries.windows(2).any(|w| w[0] >= w[1])
            || *self.cycle_boundaries.last().unwrap() >= self.controls.len()
        {
            return bad("cycle boundaries must increase and index existing controls");
        }
        if self.observations.is_empty() {
            return bad("trajectory has no observations");
        }
        if self.observations.iter().any(|o| o.cycle >= self.cycle_boundaries.len()) {
            return bad("observation refers to a missing cycle");
        }
        if self.observations.iter().any(|o| o.caps.iter().any(|c| !c.is_finite())) {
            return bad("observed caps must be finite");
        }
        Ok(())
    }
}

/// Sum of squared cap distances.
pub fn cycle_loss(predicted: &Caps, observed: &Caps) -> f64 {
    cycle_loss_generic(&predicted.map(Vec3::from_f64), observed)
}

fn cycle_loss_generic<R: Real>(predicted: &[Vec3<R>; CAP_COUNT], observed: &Caps) -> R {
    let mut acc = R::zero();
    for (p, o) in predicted.iter().zip(observed) {
        acc += (*p - Vec3::from_f64(*o)).norm_sq();
    }
    acc
}

fn with_params<T>(params: &ContactParams, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::BlowupAt { params: *params, source: Box::new(e) })
}

/// Mean cycle loss over all observations.
pub fn trajectory_loss_value(params: &ContactParams, traj: &TrainingTrajectory, robot: &Robot) -> Result<f64> {
    traj.validate()?;
    let run = with_params(params, rollout(&traj.start_state, &traj.controls, params, robot, usize::MAX))?;
    let mut total = 0.0;
    for o in &traj.observations {
        let state = run.boundary_state(traj.cycle_boundaries[o.cycle]);
        total += cycle_loss(&end_cap_positions(state, &robot.topology), &o.caps);
    }
    Ok(total / traj.observations.len() as f64)
}

/// Mean cycle loss and its gradient w.r.t. `(mu, epsilon, beta)`.
pub fn trajectory_loss(params: &ContactParams, traj: &TrainingTrajectory, robot: &Robot) -> Result<(f64, [f64; 3])> {
    traj.validate()?;
    let run = with_params(params, rollout_with_gradient(&traj.start_state, &traj.controls, params, robot, usize::MAX))?;
    let mut total = crate::real::Dual::<3>::zero();
    for o in &traj.observations {
        let state = run.boundary_state(traj.cycle_boundaries[o.cycle]);
        total += cycle_loss_generic(&end_cap_positions(state, &robot.topology), &o.caps);
    }
    let m = traj.observations.len() as f64;
    Ok((total.v / m, total.d.map(|d| d / m)))
}

/// Mean of [`trajectory_loss`] over several trajectories, evaluated in
/// parallel and summed in order.
pub fn mean_loss(params: &ContactParams, trajs: &[TrainingTrajectory], robot: &Robot) -> Result<(f64, [f64; 3])> {
    if trajs.is_empty() {
        return Err(Error::InvalidArgument("no training trajectories".into()));
    }
    let parts: Vec<Result<(f64, [f64; 3])>> = trajs.par_iter().map(|t| trajectory_loss(params, t, robot)).collect();
    let (mut loss, mut grad) = (0.0, [0.0; 3]);
    for p in parts {
        let (l, g) = p?;
        loss += l;
        for i in 0..3 {
            grad[i] += g[i];
        }
    }
    let n = trajs.len() as f64;
    Ok((loss / n, grad.map(|g| g / n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    /// Step size in units of the normalized gradient.
    pub alpha: f64,
    pub max_iters: usize,
    /// Relative loss change counted as stalled.
    pub rtol: f64,
    /// Consecutive stalled iterations that end the fit.
    pub patience: usize,
    /// Decay of the running mean of squared gradients.
    pub rms_decay: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { alpha: 0.05, max_iters: 150, rtol: 1e-4, patience: 5, rms_decay: 0.9 }
    }
}

impl FitSettings {
    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.rtol >= 0.0 && (0.0..1.0).contains(&self.rms_decay) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid fit settings: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitStop {
    Converged,
    MaxIterations,
    NonFiniteLoss,
}

/// Accepted iterates of a fit. Rejected (loss-increasing) steps leave no
/// entry, so `loss_history` never increases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub theta_history: Vec<ContactParams>,
    pub loss_history: Vec<f64>,
    pub converged: bool,
    /// Update attempts made, accepted or not.
    pub iterations: usize,
    pub stop: FitStop,
}

impl FitReport {
    pub fn params(&self) -> ContactParams {
        *self.theta_history.last().expect("a fit report holds at least the initial iterate")
    }

    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("a fit report holds at least the initial iterate")
    }
}

/// Per-parameter RMS scales are floored at this fraction of the largest.
pub const RMS_FLOOR: f64 = 1e-2;

/// Gradient descent with per-parameter RMS scaling, projection onto the
/// valid box and step halving whenever a step would raise the loss. The
/// step doubles back toward `alpha` after each accepted update.
pub fn fit(
    theta0: &ContactParams,
    trajs: &[TrainingTrajectory],
    settings: &FitSettings,
    robot: &Robot,
) -> Result<FitReport> {
    settings.validate()?;
    if trajs.is_empty() {
        return Err(Error::InvalidArgument("fit needs at least one trajectory".into()));
    }
    let mut theta = theta0.projected();
    let (mut loss, mut grad) = mean_loss(&theta, trajs, robot)?;
    let mut report =
        FitReport { theta_history: vec![theta], loss_history: vec![loss], converged: false, iterations: 0, stop: FitStop::MaxIterations };
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        report.stop = FitStop::NonFiniteLoss;
        return Ok(report);
    }
    let alpha_floor = 1e-6 * settings.alpha;
    let mut alpha = settings.alpha;
    let mut ms: Option<[f64; 3]> = None;
    let mut stalled = 0;
    for it in 1..=settings.max_iters {
        if loss == 0.0 || grad.iter().all(|g| *g == 0.0) {
            report.converged = true;
            report.stop = FitStop::Converged;
            return Ok(report);
        }
        report.iterations = it;
        let sq = grad.map(|g| g * g);
        let m = match ms {
            None => sq,
            Some(prev) => std::array::from_fn(|i| settings.rms_decay * prev[i] + (1.0 - settings.rms_decay) * sq[i]),
        };
        ms = Some(m);
        // A component whose gradient is negligible next to the others is
        // not blown up to a full-size step.
        let rms = m.map(f64::sqrt);
        let floor = RMS_FLOOR * rms.iter().fold(0.0, |a: f64, b| a.max(*b));
        let t = theta.theta();
        let mut candidate = theta;
        candidate.set_theta(std::array::from_fn(|i| t[i] - alpha * grad[i] / rms[i].max(floor)));
        let candidate = candidate.projected();
        // A blowup or a non-finite value at the candidate is treated like
        // an increase: the step is too long.
        let accepted = match mean_loss(&candidate, trajs, robot) {
            Ok((l, g)) if l.is_finite() && g.iter().all(|v| v.is_finite()) && l <= loss => Some((l, g)),
            _ => None,
        };
        match accepted {
            Some((l, g)) => {
                alpha = (2.0 * alpha).min(settings.alpha);
                stalled = if (loss - l).abs() < settings.rtol * loss { stalled + 1 } else { 0 };
                theta = candidate;
                loss = l;
                grad = g;
                report.theta_history.push(theta);
                report.loss_history.push(loss);
                if stalled >= settings.patience {
                    report.converged = true;
                    report.stop = FitStop::Converged;
                    return Ok(report);
                }
            }
            None => alpha = (0.5 * alpha).max(alpha_floor),
        }
    }
    Ok(report)
}

/// Cap RMSE per observed cycle and over the whole holdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// `(cycle, rmse)` in observation order, m.
    pub per_cycle: Vec<(usize, f64)>,
    pub aggregate: f64,
}

/// RMS of the per-cap distance: `sqrt(cycle_loss / caps)`.
pub fn cap_rmse(predicted: &Caps, observed: &Caps) -> f64 {
    (cycle_loss(predicted, observed) / CAP_COUNT as f64).sqrt()
}

pub fn validate(params: &ContactParams, holdout: &TrainingTrajectory, robot: &Robot) -> Result<ValidationReport> {
    holdout.validate()?;
    let run = with_params(params, rollout(&holdout.start_state, &holdout.controls, params, robot, usize::MAX))?;
    let mut per_cycle = Vec::with_capacity(holdout.observations.len());
    let mut sq = 0.0;
    for o in &holdout.observations {
        let caps = end_cap_positions(run.boundary_state(holdout.cycle_boundaries[o.cycle]), &robot.topology);
        let e = cap_rmse(&caps, &o.caps);
        sq += e * e;
        per_cycle.push((o.cycle, e));
    }
    let aggregate = (sq / per_cycle.len() as f64).sqrt();
    Ok(ValidationReport { per_cycle, aggregate })
}

/// How synthetic training data is produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub cycles: usize,
    /// Time each shape's targets are held, s.
    pub dwell: f64,
    /// Standard deviation of the Gaussian cap noise, m.
    pub noise_sigma: f64,
    /// The start state is the rest state raised by this much, m.
    pub drop_height: f64,
    /// Horizontal launch speed in a seeded random direction, m/s.
    pub launch_speed: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { cycles: 5, dwell: 0.1, noise_sigma: 0.002, drop_height: 0.0, launch_speed: 1.5, seed: 0 }
    }
}

/// Rolls `gait` out open-loop under `truth` and records noisy caps at the
/// end of every cycle.
pub fn generate_synthetic(
    truth: &ContactParams,
    gait: &Gait,
    rest: &SystemState,
    config: &SyntheticConfig,
    robot: &Robot,
) -> Result<TrainingTrajectory> {
    truth.validate()?;
    if gait.shapes.is_empty() {
        return Err(Error::InvalidArgument("gait has no shapes".into()));
    }
    if config.cycles == 0 || !(config.dwell > 0.0) || !(config.noise_sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("invalid synthetic config: {config:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let heading = rand::Rng::random_range(&mut rng, -std::f64::consts::PI..std::f64::consts::PI);
    let mut start = rest.clone();
    start.time = 0.0;
    let v = Vec3::new(config.launch_speed * heading.cos(), config.launch_speed * heading.sin(), 0.0);
    for rod in &mut start.rods {
        rod.position.z += config.drop_height;
        rod.lin_vel = v;
    }
    let mut controls = Vec::new();
    let mut cycle_boundaries = Vec::new();
    for _ in 0..config.cycles {
        for shape in &gait.shapes {
            controls.push(ControlSegment::new(shape.targets, config.dwell));
        }
        cycle_boundaries.push(controls.len() - 1);
    }
    let run = with_params(truth, rollout(&start, &controls, truth, robot, usize::MAX))?;
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let observations = cycle_boundaries
        .iter()
        .enumerate()
        .map(|(cycle, &seg)| {
            let mut caps = end_cap_positions(run.boundary_state(seg), &robot.topology);
            for c in &mut caps {
                *c += Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            }
            CapObservation { cycle, caps }
        })
        .collect();
    Ok(TrainingTrajectory { start_state: start, controls, observations, cycle_boundaries })
}
