use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaits::pid::{pid_rate, PidGains, PidState};
use crate::gaits::shape::{make_gait, Gait, GaitTemplates, PrimitiveSpec, ShapeLimits};
use crate::geometry::{end_cap_positions, extract_pose2, transform_state, wrap_angle, Pose2, ACTUATED_COUNT};
use crate::physics::{nominal_state, step, ContactParams, Control, Robot, Snapshot, SystemState, Trajectory};

/// When a hold counts as settled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SettleRule {
    /// Kinetic energy below which the robot counts as quiet, J.
    pub kinetic_threshold: f64,
    /// How long it must stay quiet, s.
    pub quiet_time: f64,
    /// Give up after this long, s.
    pub time_limit: f64,
    /// Drop height of the assembled robot above its resting height, m.
    pub assembly_lift: f64,
}

impl Default for SettleRule {
    fn default() -> Self {
        Self { kinetic_threshold: 1e-5, quiet_time: 0.5, time_limit: 30.0, assembly_lift: 0.005 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CostModel {
    /// Cost of a primitive is its duration in seconds.
    #[default]
    Duration,
    /// Every primitive costs 1.
    Unit,
}

/// Everything that shapes how gaits are turned into primitives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitSettings {
    pub limits: ShapeLimits,
    pub gains: PidGains,
    pub settle: SettleRule,
    /// Gait cycles averaged per primitive.
    pub cycles: usize,
    pub cost: CostModel,
    /// Snapshot stride of recorded trajectories, in steps.
    pub record_stride: usize,
    pub templates: GaitTemplates,
}

impl Default for GaitSettings {
    fn default() -> Self {
        Self {
            limits: ShapeLimits::default(),
            gains: PidGains::default(),
            settle: SettleRule::default(),
            cycles: 3,
            cost: CostModel::Duration,
            record_stride: 50,
            templates: GaitTemplates::default(),
        }
    }
}

impl GaitSettings {
    pub fn validate(&self) -> Result<()> {
        self.limits.validate()?;
        self.gains.validate()?;
        if self.cycles == 0 {
            return Err(Error::InvalidArgument("cycles must be at least 1".into()));
        }
        Ok(())
    }
}

/// A gait compiled into a planning edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub spec: PrimitiveSpec,
    /// Body-frame SE(2) change per gait cycle.
    pub delta: Pose2,
    pub cost: f64,
    /// Time per gait cycle, s.
    pub duration: f64,
    /// More than half of the shapes ended on timeout rather than converging.
    pub low_confidence: bool,
}

/// Tendon lengths as a sensor would report them: the distance between the
/// attachment points while taut, the rest length while slack.
pub fn tendon_lengths(state: &SystemState, robot: &Robot) -> [f64; ACTUATED_COUNT] {
    let caps = end_cap_positions(state, &robot.topology);
    let mut out = [0.0; ACTUATED_COUNT];
    for (k, t) in robot.topology.actuated().enumerate() {
        let geometric = (caps[t.cap_b()] - caps[t.cap_a()]).norm();
        out[k] = geometric.max(state.rest_lengths[k]);
    }
    out
}

struct Recorder {
    stride: usize,
    steps: usize,
    trajectory: Trajectory,
}

impl Recorder {
    fn new(state: &SystemState, stride: usize) -> Self {
        Self {
            stride: stride.max(1),
            steps: 0,
            trajectory: Trajectory { snapshots: vec![Snapshot { step: 0, state: state.clone() }], boundaries: vec![] },
        }
    }

    fn push(&mut self, state: &SystemState) {
        self.steps += 1;
        if self.steps % self.stride == 0 {
            self.trajectory.snapshots.push(Snapshot { step: self.steps, state: state.clone() });
        }
    }

    fn boundary(&mut self, state: &SystemState) {
        let last = self.trajectory.snapshots.last().map(|s| s.step);
        if last != Some(self.steps) {
            self.trajectory.snapshots.push(Snapshot { step: self.steps, state: state.clone() });
        }
        self.trajectory.boundaries.push(self.trajectory.snapshots.len() - 1);
    }
}

/// Drive the tendons toward one target shape with the PID until every
/// error is within tolerance, then keep driving for the hold time. A shape
/// that never converges is abandoned at the timeout. Returns whether the
/// shape converged.
fn drive_shape(
    state: &mut SystemState,
    targets: &[f64; ACTUATED_COUNT],
    gains: &PidGains,
    cp: &ContactParams,
    robot: &Robot,
    rec: &mut Recorder,
) -> Result<bool> {
    let dt = robot.body.dt;
    let max_steps = ((gains.shape_timeout / dt).round() as usize).max(1);
    let hold_steps = (gains.hold_time / dt).round() as usize;
    let mut pid = PidState::default();
    let mut converged_at = None;
    for k in 0..max_steps {
        let measured = tendon_lengths(state, robot);
        let rate = pid_rate(&measured, targets, &mut pid, gains, robot.body.motor_speed, dt);
        let mut command = [0.0; ACTUATED_COUNT];
        for i in 0..ACTUATED_COUNT {
            command[i] = (state.rest_lengths[i] + rate[i] * dt).max(1e-2);
        }
        *state = step(state, &Control::new(command), cp, robot)?;
        rec.push(state);
        if converged_at.is_none() {
            let measured = tendon_lengths(state, robot);
            if measured.iter().zip(targets).all(|(m, t)| (m - t).abs() < gains.tolerance) {
                converged_at = Some(k);
            }
        }
        if let Some(c) = converged_at {
            if k - c >= hold_steps {
                return Ok(true);
            }
        }
    }
    Ok(converged_at.is_some())
}

/// Hold fixed motor targets until the kinetic energy stays below the
/// threshold for the quiet time.
fn hold_until_settled(
    state: &mut SystemState,
    targets: &[f64; ACTUATED_COUNT],
    rule: &SettleRule,
    cp: &ContactParams,
    robot: &Robot,
    mut rec: Option<&mut Recorder>,
) -> Result<()> {
    let dt = robot.body.dt;
    let control = Control::new(*targets);
    let quiet_steps = ((rule.quiet_time / dt).round() as usize).max(1);
    let max_steps = (rule.time_limit / dt).round() as usize;
    let mut quiet = 0;
    for _ in 0..max_steps {
        *state = step(state, &control, cp, robot)?;
        if let Some(r) = rec.as_deref_mut() {
            r.push(state);
        }
        if state.kinetic_energy(robot.body.rod_mass, robot.body.rod_inertia) < rule.kinetic_threshold {
            quiet += 1;
            if quiet >= quiet_steps {
                return Ok(());
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::NotSettled(rule.time_limit))
}

/// Canonical start state: the assembled robot dropped onto the ground with
/// neutral tendons, settled, and moved so its planar pose is the origin.
pub fn settle_rest_state(cp: &ContactParams, robot: &Robot, settings: &GaitSettings) -> Result<SystemState> {
    let neutral = settings.limits.neutral_length;
    let mut state = nominal_state(robot, neutral, settings.settle.assembly_lift);
    hold_until_settled(&mut state, &[neutral; ACTUATED_COUNT], &settings.settle, cp, robot, None)?;
    let pose = extract_pose2(&state, &robot.topology)?;
    let mut out = transform_state(&state, &pose.inverse());
    out.time = 0.0;
    Ok(out)
}

/// Result of running a gait from a rest state.
#[derive(Debug, Clone)]
pub struct GaitOutcome {
    /// Mean body-frame change per cycle.
    pub delta: Pose2,
    /// Per-cycle changes; the last one includes the final settling.
    pub cycle_deltas: Vec<Pose2>,
    /// Mean time per cycle, s.
    pub duration: f64,
    pub shapes_run: usize,
    pub timeouts: usize,
    /// Recorded run; boundaries mark the end of each cycle and the end of
    /// the final hold.
    pub trajectory: Trajectory,
}

impl GaitOutcome {
    pub fn low_confidence(&self) -> bool {
        2 * self.timeouts > self.shapes_run
    }
}

/// Run `settings.cycles` cycles of a gait from `rest`, then hold the
/// neutral shape until settled.
pub fn simulate_gait(
    gait: &Gait,
    rest: &SystemState,
    cp: &ContactParams,
    robot: &Robot,
    settings: &GaitSettings,
) -> Result<GaitOutcome> {
    settings.validate()?;
    gait.validate(&settings.limits)?;
    let topo = &robot.topology;
    let mut state = rest.clone();
    let mut rec = Recorder::new(&state, settings.record_stride);
    let mut poses = vec![extract_pose2(&state, topo)?];
    let (mut shapes_run, mut timeouts) = (0, 0);
    for _ in 0..settings.cycles {
        for shape in &gait.shapes {
            shapes_run += 1;
            if !drive_shape(&mut state, &shape.targets, &settings.gains, cp, robot, &mut rec)? {
                timeouts += 1;
            }
        }
        rec.boundary(&state);
        poses.push(extract_pose2(&state, topo)?);
    }
    let gait_time = state.time - rest.time;
    let neutral = [settings.limits.neutral_length; ACTUATED_COUNT];
    hold_until_settled(&mut state, &neutral, &settings.settle, cp, robot, Some(&mut rec))?;
    rec.boundary(&state);
    *poses.last_mut().expect("at least one cycle") = extract_pose2(&state, topo)?;

    let cycle_deltas: Vec<Pose2> = poses.windows(2).map(|w| w[0].between(&w[1])).collect();
    let n = cycle_deltas.len() as f64;
    let delta = Pose2::new(
        cycle_deltas.iter().map(|d| d.x).sum::<f64>() / n,
        cycle_deltas.iter().map(|d| d.y).sum::<f64>() / n,
        wrap_angle(cycle_deltas.iter().map(|d| d.theta).sum::<f64>() / n),
    );
    Ok(GaitOutcome {
        delta,
        cycle_deltas,
        duration: gait_time / n,
        shapes_run,
        timeouts,
        trajectory: rec.trajectory,
    })
}

/// Simulate one table row from the canonical rest state.
pub fn simulate_primitive(
    spec: &PrimitiveSpec,
    rest: &SystemState,
    cp: &ContactParams,
    robot: &Robot,
    settings: &GaitSettings,
) -> Result<(Primitive, Trajectory)> {
    spec.validate()?;
    let gait = make_gait(spec, &settings.templates, &settings.limits, &robot.topology);
    let out = simulate_gait(&gait, rest, cp, robot, settings)?;
    let cost = match settings.cost {
        CostModel::Duration => out.duration,
        CostModel::Unit => 1.0,
    };
    if !out.delta.is_finite() || !(cost > 0.0) {
        return Err(Error::InvalidArgument(format!("primitive {} produced a degenerate result", spec.id)));
    }
    let prim = Primitive { spec: *spec, delta: out.delta, cost, duration: out.duration, low_confidence: out.low_confidence() };
    Ok((prim, out.trajectory))
}

/// A spec whose simulation failed.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingPrimitive {
    pub spec: PrimitiveSpec,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrimitiveLibrary {
    /// Successfully compiled primitives, in spec order.
    pub primitives: Vec<Primitive>,
    pub missing: Vec<MissingPrimitive>,
}

impl PrimitiveLibrary {
    pub fn get(&self, id: usize) -> Option<&Primitive> {
        self.primitives.iter().find(|p| p.spec.id == id)
    }
}

/// Simulate every spec (in parallel) from one shared rest state.
pub fn build_primitive_library(
    specs: &[PrimitiveSpec],
    cp: &ContactParams,
    robot: &Robot,
    settings: &GaitSettings,
) -> Result<PrimitiveLibrary> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("no primitive specs given".into()));
    }
    robot.validate()?;
    cp.validate()?;
    settings.validate()?;
    let rest = settle_rest_state(cp, robot, settings)?;
    let results: Vec<_> =
        specs.par_iter().map(|spec| (spec, simulate_primitive(spec, &rest, cp, robot, settings))).collect();
    let mut lib = PrimitiveLibrary::default();
    for (spec, r) in results {
        match r {
            Ok((p, _)) => lib.primitives.push(p),
            Err(e) => lib.missing.push(MissingPrimitive { spec: *spec, reason: e.to_string() }),
        }
    }
    Ok(lib)
}
