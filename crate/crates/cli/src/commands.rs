use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use tensegrity_core::gaits::{build_primitive_library, make_gait, settle_rest_state, Gait, Primitive};
use tensegrity_core::navigator::{run_closed_loop, run_open_loop, Executor, NavLog, Observer, PhysicsWorld};
use tensegrity_core::planner::{plan, search};
use tensegrity_core::sysid::{fit, generate_synthetic, mean_loss, FitStop, SyntheticConfig};
use tensegrity_core::{ContactParams, Pose2};

use crate::config::{ExperimentConfig, LoopMode};
use crate::error::{CliError, CliResult};
use crate::io::{self, TrajectoryFile, TrialRow};
use crate::plot::{scenario_svg, Layer};

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

/// Trajectory CSV files of a directory, in name order.
pub fn trajectory_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Debug, Serialize)]
struct FitSummary {
    files: Vec<String>,
    stop: FitStop,
    converged: bool,
    iterations: usize,
    initial_loss: f64,
    final_loss: f64,
    loss_reduction: f64,
    fitted: ContactParams,
    /// Parameters embedded in the data headers, when they all agree.
    truth: Option<ContactParams>,
    /// Cap RMSE of the fitted model on each file, m.
    cap_rmse: Vec<f64>,
}

/// Fit contact parameters to every trajectory in the data directory.
pub fn sysid(cfg: &ExperimentConfig) -> CliResult<ContactParams> {
    let dir = cfg.sysid.data_dir.as_ref().ok_or_else(|| CliError::Usage("sysid needs `sysid.data_dir`".into()))?;
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("data directory does not exist: {}", dir.display())));
    }
    let files = trajectory_files(dir)?;
    if files.is_empty() {
        return Err(CliError::Usage(format!("no trajectory files in {}", dir.display())));
    }
    let expected = io::topology_hash(&cfg.robot.topology);
    let mut data = Vec::with_capacity(files.len());
    for f in &files {
        let t = io::read_trajectory(f)?;
        if t.header.topology != expected {
            return Err(CliError::parse(f, 1, Some("topology"), "trajectory was recorded on a different robot"));
        }
        data.push(t);
    }
    let truth = data[0].header.truth.filter(|t| data.iter().all(|d| d.header.truth == Some(*t)));
    let trajs: Vec<_> = data.iter().map(|d| d.trajectory.clone()).collect();
    let [mu, epsilon, beta] = cfg.sysid.initial;
    let start = cfg.contact.with_theta(mu, epsilon, beta);
    info!("fitting {} trajectories from mu={mu} epsilon={epsilon} beta={beta}", trajs.len());
    let report = fit(&start, &trajs, &cfg.sysid.fit, &cfg.robot)?;
    let fitted = report.params();
    let cap_rmse = trajs
        .iter()
        .map(|t| tensegrity_core::sysid::validate(&fitted, t, &cfg.robot).map(|v| v.aggregate))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = FitSummary {
        files: files.iter().map(|f| f.file_name().unwrap_or_default().to_string_lossy().into_owned()).collect(),
        stop: report.stop,
        converged: report.converged,
        iterations: report.iterations,
        initial_loss: report.loss_history[0],
        final_loss: report.final_loss(),
        loss_reduction: report.loss_history[0] / report.final_loss(),
        fitted,
        truth,
        cap_rmse,
    };
    io::write_text(&out_path(cfg, "loss_curve.csv"), &io::loss_curve_csv(&report))?;
    io::write_toml(&out_path(cfg, "fit_report.toml"), &summary)?;
    io::write_toml(&out_path(cfg, "fitted_params.toml"), &fitted)?;
    info!("fitted mu={:.4} epsilon={:.4} beta={:.4} after {} iterations", fitted.mu, fitted.epsilon, fitted.beta, report.iterations);
    if report.stop == FitStop::NonFiniteLoss {
        return Err(CliError::Divergence("loss became non-finite; partial report written".into()));
    }
    Ok(fitted)
}

/// Simulate every configured primitive spec and write the library.
pub fn build_primitives(cfg: &ExperimentConfig) -> CliResult<Vec<Primitive>> {
    let specs = cfg.specs();
    info!("building {} primitives", specs.len());
    let lib = build_primitive_library(&specs, &cfg.contact, &cfg.robot, &cfg.gaits)?;
    for m in &lib.missing {
        warn!("primitive {} missing: {}", m.spec.id, m.reason);
    }
    io::write_text(&out_path(cfg, "primitives.csv"), &io::library_csv(&lib.primitives))?;
    Ok(lib.primitives)
}

/// The configured library file, or a fresh build from the model parameters.
pub fn load_library(cfg: &ExperimentConfig) -> CliResult<Vec<Primitive>> {
    match &cfg.library_file {
        Some(path) => io::read_library(path),
        None => {
            info!("no library_file given; building primitives from the model parameters");
            let lib = build_primitive_library(&cfg.specs(), &cfg.contact, &cfg.robot, &cfg.gaits)?;
            Ok(lib.primitives)
        }
    }
}

/// Plan once from the scenario start.
pub fn plan_cmd(cfg: &ExperimentConfig, plot: bool) -> CliResult<tensegrity_core::planner::Plan> {
    let prims = load_library(cfg)?;
    let scenario = cfg.scenario();
    let report = search(&scenario, &prims, &cfg.planner)?;
    io::write_text(&out_path(cfg, "expanded.csv"), &io::poses_csv(&report.expanded))?;
    let expanded = report.expanded.clone();
    let popped = report.popped;
    let result = report.into_plan();
    if plot {
        let mut layers = vec![Layer::Points { poses: &expanded, color: "#999999" }];
        if let Ok(p) = &result {
            layers.push(Layer::Path { poses: &p.poses, color: "#1f3a93", label: "plan" });
        }
        io::write_text(&out_path(cfg, "plan.svg"), &scenario_svg(&scenario, &layers))?;
    }
    let p = result?;
    info!("plan of {} primitives, cost {:.2}, {} expansions ({} popped)", p.len(), p.total_cost, expanded.len(), popped);
    io::write_text(&out_path(cfg, "plan.csv"), &io::plan_csv(&p))?;
    Ok(p)
}

#[derive(Debug, Serialize)]
struct NavSummary {
    mode: LoopMode,
    trials: usize,
    successes: usize,
    success_rate: f64,
    mean_steps: f64,
    planning_failures: usize,
    /// Wall-clock planning statistics; these vary run to run.
    mean_planning_time: f64,
    median_planning_time: f64,
    /// Histogram of planning calls: lower bin edges in seconds and counts.
    planning_time_bins: Vec<f64>,
    planning_time_counts: Vec<usize>,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn histogram(times: &[f64], bins: usize) -> (Vec<f64>, Vec<usize>) {
    let top = times.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return (vec![0.0], vec![times.len()]);
    }
    let width = top / bins as f64;
    let mut counts = vec![0; bins];
    for &t in times {
        counts[((t / width) as usize).min(bins - 1)] += 1;
    }
    ((0..bins).map(|i| i as f64 * width).collect(), counts)
}

/// Run the configured number of navigation trials.
pub fn navigate(cfg: &ExperimentConfig, plot: bool) -> CliResult<Vec<NavLog>> {
    let prims = load_library(cfg)?;
    let scenario = cfg.scenario();
    let needs_world = matches!(cfg.navigation.executor, Executor::PhysicsInLoop)
        || matches!(cfg.navigation.observer, Observer::EndCaps { .. });
    let world = if needs_world {
        Some(PhysicsWorld::new(cfg.robot.clone(), cfg.true_params(), cfg.gaits.clone())?)
    } else {
        None
    };
    let mode = cfg.navigation.mode;
    info!("{} {:?}-loop trial(s)", cfg.trials, mode);
    let logs: Vec<NavLog> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let nav = cfg.nav_config(cfg.seeds.navigation + k as u64);
            match mode {
                LoopMode::Closed => run_closed_loop(&scenario, &prims, &nav, world.as_ref()),
                LoopMode::Open => run_open_loop(&scenario, &prims, &nav, world.as_ref()),
            }
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(logs.len());
    for (k, log) in logs.iter().enumerate() {
        io::write_text(&out_path(cfg, &format!("navlog_{k:03}.csv")), &io::navlog_csv(log))?;
        rows.push(TrialRow {
            trial: k,
            seed: cfg.seeds.navigation + k as u64,
            outcome: log.outcome,
            steps: log.steps.len(),
            planning_failures: log.steps.iter().filter(|s| s.planning_failure).count(),
            final_x: log.final_truth.x,
            final_y: log.final_truth.y,
            final_distance: scenario.goal.distance(log.final_truth.x, log.final_truth.y),
        });
    }
    io::write_text(&out_path(cfg, "trials.csv"), &io::trials_csv(&rows))?;

    let successes = logs.iter().filter(|l| l.succeeded()).count();
    let mut times: Vec<f64> = logs.iter().flat_map(|l| l.steps.iter().map(|s| s.planning_time)).filter(|&t| t > 0.0).collect();
    let (bins, counts) = histogram(&times, 20);
    let summary = NavSummary {
        mode,
        trials: logs.len(),
        successes,
        success_rate: successes as f64 / logs.len() as f64,
        mean_steps: logs.iter().map(|l| l.steps.len() as f64).sum::<f64>() / logs.len() as f64,
        planning_failures: rows.iter().map(|r| r.planning_failures).sum(),
        mean_planning_time: if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 },
        median_planning_time: median(&mut times),
        planning_time_bins: bins,
        planning_time_counts: counts,
    };
    io::write_toml(&out_path(cfg, "summary.toml"), &summary)?;
    info!("{successes}/{} trials reached the goal", logs.len());

    if plot {
        let first = &logs[0];
        let planned = match mode {
            LoopMode::Open => first.planned.clone(),
            LoopMode::Closed => plan(&scenario, &prims, &cfg.planner).map(|p| p.poses).unwrap_or_default(),
        };
        let executed: Vec<Pose2> = std::iter::once(scenario.start).chain(first.steps.iter().map(|s| s.true_pose)).collect();
        let layers = [
            Layer::Path { poses: &planned, color: "#1f3a93", label: "initial plan" },
            Layer::Path { poses: &executed, color: "#e67e22", label: "executed" },
        ];
        io::write_text(&out_path(cfg, "navigation.svg"), &scenario_svg(&scenario, &layers))?;
    }
    Ok(logs)
}

fn synthetic_gait(selector: &str, cfg: &ExperimentConfig) -> CliResult<Gait> {
    if selector == "hold" {
        return Ok(Gait::hold(cfg.gaits.limits.neutral_length));
    }
    let id: usize = selector
        .strip_prefix("primitive:")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CliError::Usage(format!("unknown synthetic gait '{selector}'; use \"hold\" or \"primitive:<id>\"")))?;
    let spec = cfg
        .specs()
        .into_iter()
        .find(|s| s.id == id)
        .ok_or_else(|| CliError::Usage(format!("no primitive spec with id {id}")))?;
    Ok(make_gait(&spec, &cfg.gaits.templates, &cfg.gaits.limits, &cfg.robot.topology))
}

/// Write one synthetic training trajectory per configured gait, generated
/// under the true parameters. Returns the written paths.
pub fn gen_synthetic(cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let truth = cfg.true_params();
    let gaits: Vec<Gait> = cfg.synthetic.gaits.iter().map(|g| synthetic_gait(g, cfg)).collect::<CliResult<_>>()?;
    let rest = settle_rest_state(&truth, &cfg.robot, &cfg.gaits)?;
    let files: Vec<(PathBuf, TrajectoryFile)> = gaits
        .par_iter()
        .enumerate()
        .map(|(k, gait)| {
            let data = SyntheticConfig { seed: cfg.seeds.synthetic + k as u64, ..cfg.synthetic.data };
            let traj = generate_synthetic(&truth, gait, &rest, &data, &cfg.robot)?;
            let file = TrajectoryFile::new(traj, cfg.robot.body.dt, &cfg.robot.topology, Some(truth), Some(data.noise_sigma));
            Ok((out_path(cfg, &format!("trajectory_{k:02}.csv")), file))
        })
        .collect::<CliResult<_>>()?;
    for (path, file) in &files {
        io::write_text(path, &io::trajectory_text(file))?;
    }
    if let Ok((loss, _)) = mean_loss(&truth, &files.iter().map(|f| f.1.trajectory.clone()).collect::<Vec<_>>(), &cfg.robot) {
        info!("wrote {} trajectories; loss at the true parameters {loss:.3e}", files.len());
    }
    Ok(files.into_iter().map(|f| f.0).collect())
}
