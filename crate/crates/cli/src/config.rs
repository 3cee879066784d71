use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lanecheck_core::controllers::{CompiledController, ControllerSpec, PRESETS};
use lanecheck_core::domain::DomainModel;
use lanecheck_core::evaluation::Harness;
use lanecheck_core::offline::Thresholds;
use lanecheck_core::sim::{DEFAULT_DURATION, T_DELTA};

use crate::error::CliError;
use crate::io::read_text;

/// Settings shared by every subcommand. Loadable from TOML; command-line
/// flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Domain model file; the built-in model when absent.
    pub model: Option<PathBuf>,
    /// Preset name or controller spec file.
    pub controller: String,
    pub thresholds: Thresholds,
    /// Simulated duration T, seconds.
    pub duration: f64,
    pub t_delta: f64,
    pub seed: u64,
    /// Output file or directory, depending on the subcommand.
    pub out: Option<PathBuf>,
    pub keep_traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: None,
            controller: "oracle".into(),
            thresholds: Thresholds::default(),
            duration: DEFAULT_DURATION,
            t_delta: T_DELTA,
            seed: 0,
            out: None,
            keep_traces: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, CliError> {
        let text = read_text(path)?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.thresholds.validate()?;
        if !(self.duration > 0.0 && self.t_delta > 0.0) || !self.duration.is_finite() || !self.t_delta.is_finite() {
            return Err(CliError::Config(format!(
                "T ({}) and t_delta ({}) must be positive",
                self.duration, self.t_delta
            )));
        }
        if self.harness().sim_config().planned_steps() < 2 {
            return Err(CliError::Config("T / t_delta must give at least 2 steps".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<DomainModel, CliError> {
        match &self.model {
            None => Ok(DomainModel::default_model()),
            Some(path) => Ok(DomainModel::from_toml_str(&read_text(path)?)?),
        }
    }

    pub fn controller_spec(&self) -> Result<ControllerSpec, CliError> {
        resolve_controller(&self.controller)
    }

    pub fn compiled_controller(&self, dm: &DomainModel) -> Result<(ControllerSpec, CompiledController), CliError> {
        let spec = self.controller_spec()?;
        let compiled = spec.compile(dm)?;
        Ok((spec, compiled))
    }

    pub fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    pub fn harness(&self) -> Harness {
        Harness { duration: self.duration, t_delta: self.t_delta, thresholds: self.thresholds }
    }
}

/// A preset name, or a path to a controller spec file.
pub fn resolve_controller(arg: &str) -> Result<ControllerSpec, CliError> {
    if PRESETS.contains(&arg) {
        return Ok(ControllerSpec::preset(arg)?);
    }
    let path = Path::new(arg);
    if path.is_file() {
        return Ok(ControllerSpec::from_toml_str(&read_text(path)?)?);
    }
    Err(CliError::Config(format!(
        "controller `{arg}` is neither a preset ({}) nor a readable file",
        PRESETS.join(", ")
    )))
}
