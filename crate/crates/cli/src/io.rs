//! CSV tables and TOML records. Floats are written in shortest round-trip
//! form, so every file parses back to exactly the data that produced it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tensegrity_core::gaits::{Primitive, PrimitiveKind, PrimitiveSpec};
use tensegrity_core::navigator::{NavLog, NavOutcome, NavStep};
use tensegrity_core::physics::ControlSegment;
use tensegrity_core::planner::Plan;
use tensegrity_core::sysid::{CapObservation, FitReport, TrainingTrajectory};
use tensegrity_core::{ContactParams, Pose2, SystemState, Topology, Vec3};

use crate::config::{line_of, parse_toml, read_text};
use crate::error::{CliError, CliResult};

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = toml::to_string(value).map_err(|e| CliError::Usage(format!("cannot encode {}: {e}", path.display())))?;
    write_text(path, &text)
}

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    parse_toml(&read_text(path)?, path)
}

fn csv_text<R: Serialize>(rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize to memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn csv_error(path: &Path, e: &csv::Error, headers: Option<&csv::StringRecord>) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    let field = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.field().map(|i| {
            headers.and_then(|h| h.get(i as usize)).map_or_else(|| format!("column {}", i + 1), str::to_owned)
        }),
        _ => None,
    };
    CliError::Parse { path: path.into(), line, field, message: e.to_string() }
}

fn parse_csv<R: serde::de::DeserializeOwned>(text: &str, path: &Path) -> CliResult<Vec<R>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| csv_error(path, &e, None))?.clone();
    reader.deserialize().map(|r| r.map_err(|e| csv_error(path, &e, Some(&headers)))).collect()
}

pub fn read_csv<R: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<R>> {
    parse_csv(&read_text(path)?, path)
}

// ---- primitive library ----

#[derive(Debug, Serialize, Deserialize)]
struct PrimitiveRow {
    id: usize,
    kind: PrimitiveKind,
    left_max: u32,
    right_max: u32,
    dx: f64,
    dy: f64,
    dtheta: f64,
    cost: f64,
    duration: f64,
    low_confidence: bool,
}

pub fn library_csv(prims: &[Primitive]) -> String {
    csv_text(prims.iter().map(|p| PrimitiveRow {
        id: p.spec.id,
        kind: p.spec.kind,
        left_max: p.spec.left_max,
        right_max: p.spec.right_max,
        dx: p.delta.x,
        dy: p.delta.y,
        dtheta: p.delta.theta,
        cost: p.cost,
        duration: p.duration,
        low_confidence: p.low_confidence,
    }))
}

pub fn parse_library(text: &str, path: &Path) -> CliResult<Vec<Primitive>> {
    let rows: Vec<PrimitiveRow> = parse_csv(text, path)?;
    Ok(rows
        .into_iter()
        .map(|r| Primitive {
            spec: PrimitiveSpec::new(r.id, r.kind, r.left_max, r.right_max),
            delta: Pose2 { x: r.dx, y: r.dy, theta: r.dtheta },
            cost: r.cost,
            duration: r.duration,
            low_confidence: r.low_confidence,
        })
        .collect())
}

pub fn read_library(path: &Path) -> CliResult<Vec<Primitive>> {
    parse_library(&read_text(path)?, path)
}

// ---- plans ----

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PoseRow {
    pub step: usize,
    /// Primitive that led to this pose; empty for the start.
    pub primitive: Option<usize>,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

pub fn plan_csv(plan: &Plan) -> String {
    format!("# total_cost = {}\n", plan.total_cost) + &csv_text(plan.poses.iter().enumerate().map(|(k, p)| PoseRow {
        step: k,
        primitive: k.checked_sub(1).map(|i| plan.primitive_ids[i]),
        x: p.x,
        y: p.y,
        theta: p.theta,
    }))
}

pub fn parse_plan(text: &str, path: &Path) -> CliResult<Plan> {
    let rows: Vec<PoseRow> = parse_csv(text, path)?;
    let primitive_ids = rows.iter().skip(1).map(|r| r.primitive).collect::<Option<Vec<_>>>();
    let primitive_ids = primitive_ids.ok_or_else(|| CliError::parse(path, 0, Some("primitive"), "missing primitive id"))?;
    let poses = rows.iter().map(|r| Pose2 { x: r.x, y: r.y, theta: r.theta }).collect();
    let total_cost = text
        .lines()
        .find_map(|l| l.strip_prefix("# total_cost = "))
        .ok_or_else(|| CliError::parse(path, 1, Some("total_cost"), "missing total cost line"))?;
    let total_cost = total_cost.trim().parse().map_err(|e| CliError::parse(path, 1, Some("total_cost"), e))?;
    Ok(Plan { primitive_ids, poses, total_cost })
}

pub fn poses_csv(poses: &[Pose2]) -> String {
    #[derive(Serialize)]
    struct Row {
        x: f64,
        y: f64,
        theta: f64,
    }
    csv_text(poses.iter().map(|p| Row { x: p.x, y: p.y, theta: p.theta }))
}

// ---- navigation logs ----

/// One CSV row per executed step. Wall-clock planning time is left out so
/// reruns are byte-identical; it goes to the run summary instead.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct NavRow {
    step: usize,
    est_x: f64,
    est_y: f64,
    est_theta: f64,
    primitive: usize,
    plan_len: usize,
    expansions: usize,
    planning_failure: bool,
    recovered: bool,
    mirrored: bool,
    exec_dx: f64,
    exec_dy: f64,
    exec_dtheta: f64,
    true_x: f64,
    true_y: f64,
    true_theta: f64,
    deviation: Option<f64>,
}

pub fn navlog_csv(log: &NavLog) -> String {
    csv_text(log.steps.iter().map(|s| NavRow {
        step: s.step,
        est_x: s.estimate.x,
        est_y: s.estimate.y,
        est_theta: s.estimate.theta,
        primitive: s.primitive,
        plan_len: s.plan_len,
        expansions: s.expansions,
        planning_failure: s.planning_failure,
        recovered: s.recovered,
        mirrored: s.mirrored,
        exec_dx: s.executed.x,
        exec_dy: s.executed.y,
        exec_dtheta: s.executed.theta,
        true_x: s.true_pose.x,
        true_y: s.true_pose.y,
        true_theta: s.true_pose.theta,
        deviation: s.deviation,
    }))
}

/// Steps of a navigation log CSV. Planning times read back as zero.
pub fn parse_navlog_steps(text: &str, path: &Path) -> CliResult<Vec<NavStep>> {
    let rows: Vec<NavRow> = parse_csv(text, path)?;
    Ok(rows
        .into_iter()
        .map(|r| NavStep {
            step: r.step,
            estimate: Pose2 { x: r.est_x, y: r.est_y, theta: r.est_theta },
            primitive: r.primitive,
            plan_len: r.plan_len,
            planning_time: 0.0,
            expansions: r.expansions,
            planning_failure: r.planning_failure,
            recovered: r.recovered,
            mirrored: r.mirrored,
            executed: Pose2 { x: r.exec_dx, y: r.exec_dy, theta: r.exec_dtheta },
            true_pose: Pose2 { x: r.true_x, y: r.true_y, theta: r.true_theta },
            deviation: r.deviation,
        })
        .collect())
}

/// Per-trial summary row of a Monte-Carlo batch.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub outcome: NavOutcome,
    pub steps: usize,
    pub planning_failures: usize,
    pub final_x: f64,
    pub final_y: f64,
    pub final_distance: f64,
}

pub fn trials_csv(rows: &[TrialRow]) -> String {
    csv_text(rows)
}

// ---- sysid ----

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct LossRow {
    iteration: usize,
    loss: f64,
    mu: f64,
    epsilon: f64,
    beta: f64,
}

/// Accepted iterates of a fit, one row each.
pub fn loss_curve_csv(report: &FitReport) -> String {
    csv_text(report.loss_history.iter().zip(&report.theta_history).enumerate().map(|(i, (&loss, p))| LossRow {
        iteration: i,
        loss,
        mu: p.mu,
        epsilon: p.epsilon,
        beta: p.beta,
    }))
}

/// First 16 hex digits of the SHA-256 of the topology's TOML encoding.
pub fn topology_hash(topo: &Topology) -> String {
    let text = toml::to_string(topo).expect("topology encodes");
    Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Metadata block at the head of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub dt: f64,
    /// Integration steps between consecutive observation rows (first cycle).
    pub stride: usize,
    pub topology: String,
    /// Parameters the data was generated with, when known.
    pub truth: Option<ContactParams>,
    pub noise_sigma: Option<f64>,
    pub cycle_boundaries: Vec<usize>,
    pub start_state: SystemState,
    pub controls: Vec<ControlSegment>,
}

/// A training trajectory as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub header: TrajectoryHeader,
    pub trajectory: TrainingTrajectory,
}

impl TrajectoryFile {
    pub fn new(
        trajectory: TrainingTrajectory,
        dt: f64,
        topo: &Topology,
        truth: Option<ContactParams>,
        noise_sigma: Option<f64>,
    ) -> Self {
        let first_cycle: f64 = trajectory.controls[..=trajectory.cycle_boundaries[0]].iter().map(|c| c.duration).sum();
        let header = TrajectoryHeader {
            dt,
            stride: (first_cycle / dt).round() as usize,
            topology: topology_hash(topo),
            truth,
            noise_sigma,
            cycle_boundaries: trajectory.cycle_boundaries.clone(),
            start_state: trajectory.start_state.clone(),
            controls: trajectory.controls.clone(),
        };
        Self { header, trajectory }
    }
}

const CAP_COLUMNS: usize = 18;

/// Observation time of each cycle boundary.
fn boundary_times(t: &TrainingTrajectory) -> Vec<f64> {
    let mut elapsed = t.start_state.time;
    let mut ends = Vec::with_capacity(t.controls.len());
    for c in &t.controls {
        elapsed += c.duration;
        ends.push(elapsed);
    }
    t.cycle_boundaries.iter().map(|&b| ends[b]).collect()
}

pub fn trajectory_text(file: &TrajectoryFile) -> String {
    let meta = toml::to_string(&file.header).expect("header encodes");
    let mut out = String::new();
    for line in meta.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    let mut header = vec!["cycle".to_string(), "time".to_string()];
    for c in 0..CAP_COLUMNS / 3 {
        for axis in ["x", "y", "z"] {
            header.push(format!("cap{c}_{axis}"));
        }
    }
    let times = boundary_times(&file.trajectory);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for o in &file.trajectory.observations {
        let mut rec = vec![o.cycle.to_string(), times[o.cycle].to_string()];
        rec.extend(o.caps.iter().flat_map(|c| [c.x, c.y, c.z]).map(|v| v.to_string()));
        w.write_record(&rec).expect("in-memory write");
    }
    out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("utf-8"));
    out
}

pub fn parse_trajectory(text: &str, path: &Path) -> CliResult<TrajectoryFile> {
    let meta: String = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| format!("{}\n", l.strip_prefix("# ").or_else(|| l.strip_prefix('#')).unwrap_or(l)))
        .collect();
    let header: TrajectoryHeader = toml::from_str(&meta).map_err(|e| {
        let line = e.span().map_or(0, |s| line_of(&meta, s.start));
        CliError::parse(path, line, None, format!("trajectory header: {}", e.message()))
    })?;

    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut observations = Vec::new();
    let mut last_time = f64::NEG_INFINITY;
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, &e, None))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != CAP_COLUMNS + 2 {
            return Err(CliError::parse(path, line, None, format!("expected {} fields, found {}", CAP_COLUMNS + 2, rec.len())));
        }
        let num = |i: usize, name: &str| -> CliResult<f64> {
            rec[i].trim().parse::<f64>().map_err(|e| CliError::parse(path, line, Some(name), e))
        };
        let cycle: usize =
            rec[0].trim().parse().map_err(|e: std::num::ParseIntError| CliError::parse(path, line, Some("cycle"), e))?;
        let time = num(1, "time")?;
        if !(time > last_time) {
            return Err(CliError::parse(path, line, Some("time"), "times must increase strictly"));
        }
        last_time = time;
        let mut caps = [Vec3::zero(); CAP_COLUMNS / 3];
        for (c, cap) in caps.iter_mut().enumerate() {
            let names = [format!("cap{c}_x"), format!("cap{c}_y"), format!("cap{c}_z")];
            *cap = Vec3::new(num(2 + 3 * c, &names[0])?, num(3 + 3 * c, &names[1])?, num(4 + 3 * c, &names[2])?);
        }
        observations.push(CapObservation { cycle, caps });
    }
    let trajectory = TrainingTrajectory {
        start_state: header.start_state.clone(),
        controls: header.controls.clone(),
        observations,
        cycle_boundaries: header.cycle_boundaries.clone(),
    };
    trajectory.validate().map_err(|e| CliError::parse(path, 0, None, e))?;
    Ok(TrajectoryFile { header, trajectory })
}

pub fn read_trajectory(path: &Path) -> CliResult<TrajectoryFile> {
    parse_trajectory(&read_text(path)?, path)
}
