//! Experiment configuration, read from a single TOML file. Every section is
//! optional and falls back to the library defaults; relative paths resolve
//! against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tensegrity_core::gaits::{GaitSettings, GaitTemplates, PrimitiveSpec};
use tensegrity_core::navigator::{Disturbance, Executor, Observer};
use tensegrity_core::planner::{PlannerSettings, Scenario};
use tensegrity_core::sysid::{FitSettings, SyntheticConfig};
use tensegrity_core::{ContactParams, Robot};

use crate::error::{CliError, CliResult};

/// One named seed per stochastic subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Seeds {
    pub navigation: u64,
    pub synthetic: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LoopMode {
    #[default]
    Closed,
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavigationSection {
    pub mode: LoopMode,
    pub observer: Observer,
    pub executor: Executor,
    pub disturbance: Disturbance,
    pub step_limit: usize,
    pub pose_rate_hz: f64,
    pub mirrored_support: bool,
}

impl Default for NavigationSection {
    fn default() -> Self {
        let nav = tensegrity_core::navigator::NavConfig::default();
        Self {
            mode: LoopMode::Closed,
            observer: nav.observer,
            executor: nav.executor,
            disturbance: nav.disturbance,
            step_limit: nav.step_limit,
            pose_rate_hz: nav.pose_rate_hz,
            mirrored_support: nav.mirrored_support,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SysidSection {
    /// Directory of trajectory CSV files.
    pub data_dir: Option<PathBuf>,
    /// Starting guess for (mu, epsilon, beta).
    pub initial: [f64; 3],
    pub fit: FitSettings,
}

impl Default for SysidSection {
    fn default() -> Self {
        Self { data_dir: None, initial: [0.8, 0.5, 0.5], fit: FitSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSection {
    /// One file per entry: `"hold"` for the neutral shape, or a primitive id
    /// such as `"primitive:9"` for that primitive's gait.
    pub gaits: Vec<String>,
    #[serde(flatten)]
    pub data: SyntheticConfig,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        Self { gaits: vec!["hold".into(); 4], data: SyntheticConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub trials: usize,
    pub seeds: Seeds,
    pub robot: Robot,
    /// Model contact parameters, used for planning and primitive building.
    pub contact: ContactParams,
    /// True contact parameters of the world, when they differ from the
    /// model. Drives physics-in-the-loop execution and synthetic data.
    pub truth: Option<ContactParams>,
    pub gaits: GaitSettings,
    /// TOML file of gait templates, replacing `gaits.templates`.
    pub gait_file: Option<PathBuf>,
    /// Custom primitive list; the 11-row default table when absent.
    pub primitives: Option<Vec<PrimitiveSpec>>,
    /// Primitive library CSV for planning and navigation. Built from the
    /// model parameters when absent.
    pub library_file: Option<PathBuf>,
    pub scenario: Option<Scenario>,
    pub scenario_file: Option<PathBuf>,
    pub planner: PlannerSettings,
    pub navigation: NavigationSection,
    pub sysid: SysidSection,
    pub synthetic: SyntheticSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            trials: 1,
            seeds: Seeds::default(),
            robot: Robot::default(),
            contact: ContactParams::default(),
            truth: None,
            gaits: GaitSettings::default(),
            gait_file: None,
            primitives: None,
            library_file: None,
            scenario: None,
            scenario_file: None,
            planner: PlannerSettings::default(),
            navigation: NavigationSection::default(),
            sysid: SysidSection::default(),
            synthetic: SyntheticSection::default(),
        }
    }
}

/// Line (1-based) of a byte offset.
pub(crate) fn line_of(text: &str, offset: usize) -> u64 {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() as u64 + 1
}

/// Parse TOML text into `T`, reporting the offending line and key.
pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> CliResult<T> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| line_of(text, s.start));
        CliError::parse(path, line, None, e.message())
    })
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

impl ExperimentConfig {
    /// Read a config and resolve its relative paths. A missing referenced
    /// file is a usage error.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text(path)?;
        let mut cfg: ExperimentConfig = parse_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        if let Some(file) = cfg.gait_file.clone() {
            cfg.gaits.templates = parse_toml::<GaitTemplates>(&read_text(&file)?, &file)?;
        }
        if let Some(file) = cfg.scenario_file.clone() {
            cfg.scenario = Some(parse_toml(&read_text(&file)?, &file)?);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for p in [&mut self.gait_file, &mut self.library_file, &mut self.scenario_file, &mut self.sysid.data_dir] {
            if let Some(p) = p.as_mut() {
                fix(p);
            }
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        for p in [&self.gait_file, &self.library_file, &self.scenario_file].into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::Usage(format!("referenced file does not exist: {}", p.display())));
            }
        }
        if self.trials == 0 {
            return Err(CliError::Usage("trials must be at least 1".into()));
        }
        self.robot.validate()?;
        self.contact.validate()?;
        if let Some(t) = &self.truth {
            t.validate()?;
        }
        self.gaits.validate()?;
        self.planner.validate()?;
        Ok(())
    }

    pub fn specs(&self) -> Vec<PrimitiveSpec> {
        self.primitives.clone().unwrap_or_else(PrimitiveSpec::table)
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario.clone().unwrap_or_else(Scenario::two_obstacle_course)
    }

    /// Parameters of the simulated world.
    pub fn true_params(&self) -> ContactParams {
        self.truth.unwrap_or(self.contact)
    }

    pub fn nav_config(&self, seed: u64) -> tensegrity_core::navigator::NavConfig {
        let n = &self.navigation;
        tensegrity_core::navigator::NavConfig {
            observer: n.observer,
            executor: n.executor,
            disturbance: n.disturbance,
            planner: self.planner,
            step_limit: n.step_limit,
            seed,
            mirrored_support: n.mirrored_support,
            pose_rate_hz: n.pose_rate_hz,
        }
    }
}
