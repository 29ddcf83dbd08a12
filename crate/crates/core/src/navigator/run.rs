use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::execute::{execute_primitive, Disturbance, Executor, PhysicsWorld};
use super::observe::{observe, Observer};
use super::NavRng;
use crate::error::{Error, Result};
use crate::gaits::Primitive;
use crate::geometry::Pose2;
use crate::planner::{collision_detect, point_blocked, search, PlannerSettings, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavConfig {
    pub observer: Observer,
    pub executor: Executor,
    pub disturbance: Disturbance,
    pub planner: PlannerSettings,
    pub step_limit: usize,
    pub seed: u64,
    /// The robot is known to rest in a mirrored support state. With cap
    /// observations this maps every executed gait through the Left/Right
    /// label swap.
    pub mirrored_support: bool,
    /// Pose tracker rate, Hz. Logged for timing only; the loop is driven by
    /// primitive completion.
    pub pose_rate_hz: f64,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            observer: Observer::default(),
            executor: Executor::default(),
            disturbance: Disturbance::None,
            planner: PlannerSettings::default(),
            step_limit: 60,
            seed: 0,
            mirrored_support: false,
            pose_rate_hz: 7.0,
        }
    }
}

impl NavConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_limit == 0 {
            return Err(Error::InvalidArgument("step_limit must be at least 1".into()));
        }
        if !(self.pose_rate_hz > 0.0) {
            return Err(Error::InvalidArgument("pose_rate_hz must be positive".into()));
        }
        self.observer.validate()?;
        self.executor.validate()?;
        self.disturbance.validate()?;
        self.planner.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NavOutcome {
    GoalReached,
    StepLimit,
    Stuck,
}

/// One executed primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavStep {
    pub step: usize,
    /// Pose estimate the decision was based on (the true pose in open loop).
    pub estimate: Pose2,
    pub primitive: usize,
    /// Length of the plan the primitive came from.
    pub plan_len: usize,
    /// Wall-clock planning time, s; zero when no planning happened.
    pub planning_time: f64,
    pub expansions: usize,
    pub planning_failure: bool,
    /// Planning started from the nearest free pose because the estimate
    /// overlapped an obstacle or the boundary.
    pub recovered: bool,
    pub mirrored: bool,
    /// True pose change caused by the execution, in the body frame.
    pub executed: Pose2,
    pub true_pose: Pose2,
    /// Distance from the planned pose (open loop only).
    pub deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavLog {
    pub steps: Vec<NavStep>,
    pub outcome: NavOutcome,
    /// Last pose estimate (closed loop) or true pose (open loop).
    pub final_estimate: Pose2,
    pub final_truth: Pose2,
    /// Poses of the executed open-loop plan, start included.
    pub planned: Vec<Pose2>,
}

impl NavLog {
    pub fn succeeded(&self) -> bool {
        self.outcome == NavOutcome::GoalReached
    }

    /// Mean wall-clock time of the planning calls, s.
    pub fn mean_planning_time(&self) -> f64 {
        let calls: Vec<f64> = self.steps.iter().map(|s| s.planning_time).filter(|&t| t > 0.0).collect();
        if calls.is_empty() {
            0.0
        } else {
            calls.iter().sum::<f64>() / calls.len() as f64
        }
    }
}

fn lookup<'a>(primitives: &'a [Primitive], id: usize) -> Result<&'a Primitive> {
    primitives
        .iter()
        .find(|p| p.spec.id == id)
        .ok_or_else(|| Error::InvalidArgument(format!("plan refers to unknown primitive {id}")))
}

fn body_of(world: Option<&PhysicsWorld>) -> Option<(&crate::SystemState, &crate::physics::Robot)> {
    world.map(|w| (&w.rest, &w.robot))
}

/// Nearest pose to `pose` (same heading) whose robot disc is clear of
/// every obstacle and inside the boundary, found by pushing the disc
/// radially out of each overlap in turn. `None` when that does not settle,
/// e.g. in a gap narrower than the disc.
pub(crate) fn nearest_free(pose: &Pose2, scenario: &Scenario) -> Option<Pose2> {
    const GAP: f64 = 1e-6;
    let r = scenario.robot_radius + GAP;
    let b = &scenario.boundary;
    let (mut x, mut y) = (pose.x, pose.y);
    for _ in 0..8 {
        if !point_blocked(x, y, scenario) {
            return Some(Pose2::new(x, y, pose.theta));
        }
        x = x.clamp(b.min_x + r, b.max_x - r);
        y = y.clamp(b.min_y + r, b.max_y - r);
        for o in &scenario.obstacles {
            let d = (x - o.x).hypot(y - o.y);
            let need = o.radius + r;
            if d < need {
                let (ux, uy) = if d > 0.0 { ((x - o.x) / d, (y - o.y) / d) } else { (1.0, 0.0) };
                x = o.x + need * ux;
                y = o.y + need * uy;
            }
        }
    }
    None
}

/// The last successful plan and how much of it has been executed.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct PlanCache {
    ids: Vec<usize>,
    cursor: usize,
}

impl PlanCache {
    /// Primitive to execute next, the length of the plan it came from and
    /// whether it is a fallback. A fresh plan replaces the cache and yields
    /// its head; without one the next unconsumed cached primitive is used.
    pub(crate) fn next(&mut self, fresh: Option<Vec<usize>>) -> Option<(usize, usize, bool)> {
        let failure = match fresh {
            Some(ids) if !ids.is_empty() => {
                *self = PlanCache { ids, cursor: 0 };
                false
            }
            _ => true,
        };
        let id = *self.ids.get(self.cursor)?;
        self.cursor += 1;
        Some((id, self.ids.len(), failure))
    }
}

/// Observe, replan, execute the first primitive, repeat.
pub fn run_closed_loop(
    scenario: &Scenario,
    primitives: &[Primitive],
    config: &NavConfig,
    world: Option<&PhysicsWorld>,
) -> Result<NavLog> {
    config.validate()?;
    scenario.validate()?;
    let mut rng = NavRng::new(config.seed);
    let mirrored = config.mirrored_support && matches!(config.observer, Observer::EndCaps { .. });
    let mut truth = scenario.start;
    let mut cache = PlanCache::default();
    let mut steps = Vec::new();
    let mut local = scenario.clone();
    loop {
        let estimate = observe(&truth, &config.observer, body_of(world), &mut rng.observer)?;
        let outcome = if scenario.at_goal(estimate.x, estimate.y) {
            Some(NavOutcome::GoalReached)
        } else if steps.len() >= config.step_limit {
            Some(NavOutcome::StepLimit)
        } else {
            None
        };
        if let Some(outcome) = outcome {
            return Ok(NavLog { steps, outcome, final_estimate: estimate, final_truth: truth, planned: Vec::new() });
        }

        // a noisy estimate inside an obstacle margin is planned from the
        // nearest free pose; execution still starts from wherever the robot is
        let from = if collision_detect(&estimate, scenario) { nearest_free(&estimate, scenario) } else { Some(estimate) };
        let t0 = Instant::now();
        let report = from.and_then(|start| {
            local.start = start;
            search(&local, primitives, &config.planner).ok()
        });
        let planning_time = t0.elapsed().as_secs_f64();
        let expansions = report.as_ref().map_or(0, |r| r.expanded.len());
        let fresh = report.and_then(|r| r.outcome.ok()).filter(|p| !p.is_empty());
        let Some((id, plan_len, failure)) = cache.next(fresh.map(|p| p.primitive_ids)) else {
            return Ok(NavLog { steps, outcome: NavOutcome::Stuck, final_estimate: estimate, final_truth: truth, planned: Vec::new() });
        };
        let prim = lookup(primitives, id)?;
        let next = execute_primitive(
            &truth,
            prim,
            &config.executor,
            &config.disturbance,
            steps.len(),
            mirrored,
            world,
            scenario,
            &mut rng.executor,
            &mut rng.disturbance,
        )?;
        steps.push(NavStep {
            step: steps.len(),
            estimate,
            primitive: id,
            plan_len,
            planning_time,
            expansions,
            planning_failure: failure,
            recovered: from.is_some_and(|f| f != estimate),
            mirrored,
            executed: truth.between(&next),
            true_pose: next,
            deviation: None,
        });
        truth = next;
    }
}

/// Plan once from the scenario start and execute the whole plan blind.
/// Each step logs its distance from the planned pose.
pub fn run_open_loop(
    scenario: &Scenario,
    primitives: &[Primitive],
    config: &NavConfig,
    world: Option<&PhysicsWorld>,
) -> Result<NavLog> {
    config.validate()?;
    let t0 = Instant::now();
    let report = search(scenario, primitives, &config.planner)?;
    let planning_time = t0.elapsed().as_secs_f64();
    let expansions = report.expanded.len();
    let plan = report.into_plan()?;
    let mut rng = NavRng::new(config.seed);
    let mut truth = scenario.start;
    let mut steps = Vec::with_capacity(plan.len());
    for (k, &id) in plan.primitive_ids.iter().enumerate() {
        let prim = lookup(primitives, id)?;
        let next = execute_primitive(
            &truth,
            prim,
            &config.executor,
            &config.disturbance,
            k,
            false,
            world,
            scenario,
            &mut rng.executor,
            &mut rng.disturbance,
        )?;
        let planned = plan.poses[k + 1];
        steps.push(NavStep {
            step: k,
            estimate: truth,
            primitive: id,
            plan_len: plan.len(),
            planning_time: if k == 0 { planning_time } else { 0.0 },
            expansions: if k == 0 { expansions } else { 0 },
            planning_failure: false,
            recovered: false,
            mirrored: false,
            executed: truth.between(&next),
            true_pose: next,
            deviation: Some(next.distance_to(planned.x, planned.y)),
        });
        truth = next;
    }
    let outcome = if scenario.at_goal(truth.x, truth.y) { NavOutcome::GoalReached } else { NavOutcome::Stuck };
    Ok(NavLog { steps, outcome, final_estimate: truth, final_truth: truth, planned: plan.poses })
}
