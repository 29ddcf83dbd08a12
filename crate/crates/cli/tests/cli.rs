use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tensegrity_cli::config::parse_toml;
use tensegrity_cli::exit;
use tensegrity_cli::io::{read_library, read_trajectory};
use tensegrity_core::gaits::{settle_rest_state, GaitSettings};
use tensegrity_core::geometry::end_cap_positions;
use tensegrity_core::physics::rollout;
use tensegrity_core::{ContactParams, Robot};

fn tensegrity(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tensegrity"))
        .args(args)
        .current_dir(dir)
        .env("TENSEGRITY_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    v.sort();
    v
}

const SYNTH: &str = r#"
truth = { mu = 0.5, epsilon = 0.2, beta = 0.3 }
[seeds]
synthetic = 3
[synthetic]
gaits = ["hold", "primitive:9", "primitive:0"]
cycles = 2
"#;

#[test]
fn three_gaits_give_three_files_of_two_cycles() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", SYNTH);
    let out = tensegrity(tmp.path(), &["gen-synthetic", "--config", "c.toml", "--out", "data"]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
    let files = csv_files(&tmp.path().join("data"));
    assert_eq!(files.len(), 3);
    let truth = ContactParams::default().with_theta(0.5, 0.2, 0.3);
    for f in &files {
        let t = read_trajectory(f).unwrap();
        assert_eq!(t.trajectory.observations.len(), 2);
        assert_eq!(t.header.truth, Some(truth));
        let rows = std::fs::read_to_string(f).unwrap().lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(rows, 3, "header line plus two cycles");
    }
}

#[test]
fn noiseless_synthetic_caps_equal_a_direct_rollout() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", "[synthetic]\ngaits = [\"hold\"]\ncycles = 3\nnoise_sigma = 0.0\n");
    assert_eq!(code(&tensegrity(tmp.path(), &["gen-synthetic", "--config", "c.toml", "--out", "d"])), exit::OK);
    let t = read_trajectory(&tmp.path().join("d/trajectory_00.csv")).unwrap();
    let robot = Robot::default();
    let tr = &t.trajectory;
    let run = rollout(&tr.start_state, &tr.controls, &ContactParams::default(), &robot, usize::MAX).unwrap();
    for o in &tr.observations {
        let caps = end_cap_positions(run.boundary_state(tr.cycle_boundaries[o.cycle]), &robot.topology);
        for (a, b) in caps.iter().zip(&o.caps) {
            assert!((*a - *b).norm() < 1e-12, "cycle {}", o.cycle);
        }
    }
    // the recorded start is the settled rest state
    let rest = settle_rest_state(&ContactParams::default(), &robot, &GaitSettings::default()).unwrap();
    assert!((tr.start_state.rods[0].position.z - rest.rods[0].position.z).abs() < 1e-12);
}

#[test]
fn sysid_recovers_friction_from_generated_data() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "gen.toml", "truth = { mu = 0.5, epsilon = 0.2, beta = 0.3 }\n");
    assert_eq!(code(&tensegrity(tmp.path(), &["gen-synthetic", "--config", "gen.toml", "--out", "data"])), exit::OK);
    write(tmp.path(), "fit.toml", "[sysid]\ndata_dir = \"data\"\n");
    let out = tensegrity(tmp.path(), &["sysid", "--config", "fit.toml", "--out", "fit"]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
    let fitted: ContactParams =
        parse_toml(&std::fs::read_to_string(tmp.path().join("fit/fitted_params.toml")).unwrap(), Path::new("f")).unwrap();
    assert!((fitted.mu - 0.5).abs() <= 0.05, "{fitted:?}");
    let curve = std::fs::read_to_string(tmp.path().join("fit/loss_curve.csv")).unwrap();
    assert!(curve.lines().count() > 2);
}

#[test]
fn custom_primitive_list_builds_only_those() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "c.toml",
        r#"
[[primitives]]
id = 0
kind = "ForwardRoll"
left_max = 200
right_max = 200

[[primitives]]
id = 9
kind = "Counterclockwise"
left_max = 200
right_max = 200
"#,
    );
    let out = tensegrity(tmp.path(), &["build-primitives", "--config", "c.toml", "--out", "lib"]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
    let lib = read_library(&tmp.path().join("lib/primitives.csv")).unwrap();
    assert_eq!(lib.iter().map(|p| p.spec.id).collect::<Vec<_>>(), vec![0, 9]);
}

#[test]
fn plan_writes_plan_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tensegrity(tmp.path(), &["plan", "--out", "p", "--plot"]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
    let plan = std::fs::read_to_string(tmp.path().join("p/plan.csv")).unwrap();
    assert!(plan.starts_with("# total_cost = "));
    let svg = std::fs::read_to_string(tmp.path().join("p/plan.svg")).unwrap();
    assert!(svg.contains("<polyline"));
}

#[test]
fn navigate_writes_one_log_per_trial() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tensegrity(tmp.path(), &["navigate", "--out", "n", "--trials", "3", "--seed", "4", "--plot"]);
    assert_eq!(code(&out), exit::OK, "{}", String::from_utf8_lossy(&out.stderr));
    let n = tmp.path().join("n");
    for k in 0..3 {
        assert!(n.join(format!("navlog_{k:03}.csv")).is_file());
    }
    let trials = std::fs::read_to_string(n.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 4);
    assert!(trials.lines().nth(1).unwrap().starts_with("0,4,"));
    assert!(n.join("summary.toml").is_file() && n.join("navigation.svg").is_file());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", &format!("trials = 3\n[navigation]\nmode = \"open\"\n{SYNTH}"));
    for cmd in ["gen-synthetic", "navigate", "plan"] {
        for o in ["a", "b"] {
            assert_eq!(code(&tensegrity(tmp.path(), &[cmd, "--config", "c.toml", "--out", &format!("{cmd}_{o}")])), exit::OK);
        }
        let a = csv_files(&tmp.path().join(format!("{cmd}_a")));
        assert!(!a.is_empty());
        for f in a {
            let other = tmp.path().join(format!("{cmd}_b")).join(f.file_name().unwrap());
            assert_eq!(std::fs::read(&f).unwrap(), std::fs::read(other).unwrap(), "{}", f.display());
        }
    }
}

#[test]
fn usage_errors_exit_with_the_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&tensegrity(tmp.path(), &["plan", "--bogus"])), exit::USAGE);
    assert_eq!(code(&tensegrity(tmp.path(), &[])), exit::USAGE);
    assert_eq!(code(&tensegrity(tmp.path(), &["plan", "--config", "missing.toml"])), exit::USAGE);
    // sysid without any data directory
    assert_eq!(code(&tensegrity(tmp.path(), &["sysid"])), exit::USAGE);
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    write(tmp.path(), "e.toml", "[sysid]\ndata_dir = \"empty\"\n");
    assert_eq!(code(&tensegrity(tmp.path(), &["sysid", "--config", "e.toml"])), exit::USAGE);
    assert_eq!(code(&tensegrity(tmp.path(), &["navigate", "--trials", "0"])), exit::USAGE);
}

#[test]
fn malformed_input_exits_with_the_parse_code() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.toml", "trials = 2\n[planner]\nprune_radius = \"wide\"\n");
    let out = tensegrity(tmp.path(), &["plan", "--config", "bad.toml"]);
    assert_eq!(code(&out), exit::PARSE);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    write(tmp.path(), "lib.csv", "id,kind,left_max,right_max,dx,dy,dtheta,cost,duration,low_confidence\n0,ForwardRoll,200,200,0.1,oops,0,1,1,false\n");
    write(tmp.path(), "c.toml", "library_file = \"lib.csv\"\n");
    let out = tensegrity(tmp.path(), &["plan", "--config", "c.toml"]);
    assert_eq!(code(&out), exit::PARSE);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dy"));
}

#[test]
fn unreachable_goal_exits_with_the_no_path_code() {
    let tmp = tempfile::tempdir().unwrap();
    let ring: Vec<String> = (0..12)
        .map(|k| {
            let a = k as f64 * std::f64::consts::PI / 6.0;
            format!("{{ x = {}, y = {}, radius = 0.22 }}", 3.0 + 0.55 * a.cos(), 0.55 * a.sin())
        })
        .collect();
    write(
        tmp.path(),
        "c.toml",
        &format!(
            "[scenario]\nstart = {{ x = 0.3, y = 0.0, theta = 0.0 }}\ngoal = {{ x = 3.0, y = 0.0 }}\n\
             boundary = {{ min_x = -0.5, min_y = -1.5, max_x = 4.5, max_y = 1.5 }}\nobstacles = [{}]\n",
            ring.join(", ")
        ),
    );
    let out = tensegrity(tmp.path(), &["plan", "--config", "c.toml", "--out", "p"]);
    assert_eq!(code(&out), exit::NO_PATH, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exhausted"));
}

#[test]
fn non_finite_loss_exits_with_the_divergence_code() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "gen.toml", "[synthetic]\ngaits = [\"hold\"]\ncycles = 2\n");
    assert_eq!(code(&tensegrity(tmp.path(), &["gen-synthetic", "--config", "gen.toml", "--out", "data"])), exit::OK);
    // an absurd observation overflows the squared error
    let f = tmp.path().join("data/trajectory_00.csv");
    let text = std::fs::read_to_string(&f).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let last = lines.len() - 1;
    let mut cells: Vec<&str> = lines[last].split(',').collect();
    let n = cells.len();
    cells[n - 1] = "1e200";
    lines[last] = cells.join(",");
    std::fs::write(&f, lines.join("\n") + "\n").unwrap();
    write(tmp.path(), "fit.toml", "[sysid]\ndata_dir = \"data\"\n");
    let out = tensegrity(tmp.path(), &["sysid", "--config", "fit.toml", "--out", "fit"]);
    assert_eq!(code(&out), exit::DIVERGENCE, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("fit/fit_report.toml").is_file());
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(&dir).unwrap().flatten() {
        let p = e.path();
        if p.extension().is_some_and(|x| x == "toml") {
            if let Err(err) = tensegrity_cli::ExperimentConfig::load(&p) {
                panic!("{}: {err}", p.display());
            }
            n += 1;
        }
    }
    assert!(n >= 5, "found {n} configs");
}
