//! JSON experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::field_sampler::GridSpec;
use crate::stein_bounds::Mode;

/// Fewer replicates than this make the empirical W1 meaningless.
pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub t: f64,
    /// Defaults to the spacing where `1 - rho(h) = 0.01`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

/// `u_T = c (log T)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct USchedule {
    pub c: f64,
    pub gamma: f64,
}

impl USchedule {
    pub fn level(&self, t: f64) -> f64 {
        self.c * t.ln().powf(self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: CovarianceModel,
    pub grid: GridConfig,
    #[serde(alias = "master_seed")]
    pub seed: u64,
    #[serde(rename = "T_ladder", default)]
    pub t_ladder: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_schedule: Option<USchedule>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_replicates() -> usize {
    1000
}

fn default_mode() -> Mode {
    Mode::Fixed
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn spacing(&self) -> f64 {
        self.grid.h.unwrap_or_else(|| self.model.default_spacing())
    }

    pub fn grid_for(&self, t: f64) -> Result<GridSpec> {
        GridSpec::new(self.model.dim(), t, self.spacing())
    }

    /// Checks needed before a study in `mode` can run.
    pub fn validate_study(&self, mode: Mode) -> Result<()> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::Config(format!(
                "need at least {MIN_REPLICATES} replicates, got {}",
                self.replicates
            )));
        }
        if self.t_ladder.is_empty() {
            return Err(Error::Config("T_ladder is empty".into()));
        }
        if self.t_ladder.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("T_ladder must be strictly increasing".into()));
        }
        if self.t_ladder.iter().any(|&t| !(t > 1.0) || !t.is_finite()) {
            return Err(Error::Config("every T in the ladder must exceed 1".into()));
        }
        match mode {
            Mode::Fixed => {
                if !self.u.is_some_and(f64::is_finite) {
                    return Err(Error::Config("fixed mode needs a finite level `u`".into()));
                }
            }
            Mode::Moving => {
                let Some(s) = self.u_schedule else {
                    return Err(Error::Config("moving mode needs `u_schedule` {c, gamma}".into()));
                };
                if !(s.c > 0.0 && s.gamma.is_finite()) {
                    return Err(Error::Config(format!("u_schedule needs c > 0, got {s:?}")));
                }
                let half_d = 0.5 * self.model.dim() as f64;
                if !self.beta.is_some_and(|b| b > 0.0 && b < half_d) {
                    return Err(Error::Config(format!(
                        "moving mode needs `beta` in (0, {half_d})"
                    )));
                }
            }
        }
        Ok(())
    }
}
