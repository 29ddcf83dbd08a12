use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use tensegrity_cli::{commands, exit, CliError, CliResult, ExperimentConfig};

/// Log filter variable, e.g. `TENSEGRITY_LOG=debug`.
const LOG_ENV: &str = "TENSEGRITY_LOG";

#[derive(Parser)]
#[command(name = "tensegrity", version, about = "3-bar tensegrity simulation, identification and navigation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed, overriding every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte-Carlo trial count, overriding the config.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Also write an SVG plot.
    #[arg(long, global = true)]
    plot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fit contact parameters to recorded trajectories.
    Sysid(Common),
    /// Simulate gaits into a motion-primitive library.
    BuildPrimitives(Common),
    /// Plan a primitive sequence from start to goal.
    Plan(Common),
    /// Run open- or closed-loop navigation trials.
    Navigate(Common),
    /// Generate synthetic training trajectories.
    GenSynthetic(Common),
}

fn load(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) if !path.is_file() => {
            return Err(CliError::Usage(format!("config file does not exist: {}", path.display())))
        }
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seeds.navigation = seed;
        cfg.seeds.synthetic = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sysid(c) => commands::sysid(&load(&c)?).map(drop),
        Command::BuildPrimitives(c) => commands::build_primitives(&load(&c)?).map(drop),
        Command::Plan(c) => commands::plan_cmd(&load(&c)?, c.plot).map(drop),
        Command::Navigate(c) => commands::navigate(&load(&c)?, c.plot).map(drop),
        Command::GenSynthetic(c) => commands::gen_synthetic(&load(&c)?).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { exit::OK as u8 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
