//! JSON experiment configuration. Unknown keys are hard errors — a typo in a
//! physics parameter must never silently fall back to a default.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "KERRSYNTH_OUT";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Per-step interaction strength.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Single accumulated strength T.
    #[serde(default)]
    pub t_total: Option<f64>,
    /// Multiple accumulated strengths (self-Kerr Wigner sweeps).
    #[serde(default)]
    pub t_list: Option<Vec<f64>>,
    /// Scan upper limit (cross-Kerr); defaults to pi rounded to the grid.
    #[serde(default)]
    pub t_max: Option<f64>,
    /// Scan step.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Coherent amplitude of the (first) mode, [re, im].
    #[serde(default)]
    pub beta: Option<[f64; 2]>,
    /// Coherent amplitude of the second mode, [re, im].
    #[serde(default)]
    pub alpha: Option<[f64; 2]>,
    /// Per-step transmittance; 1.0 disables loss.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub n_max: Option<usize>,
    /// Repetition counts for the scaling probe.
    #[serde(default)]
    pub reps_list: Option<Vec<usize>>,
    /// Repetition counts for control-z convergence.
    #[serde(default)]
    pub reps: Option<usize>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Seed for randomized property sweeps.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    SelfKerr,
    CrossKerr,
    ControlZ,
    Scaling,
    Props,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub resolution: usize,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn defaults(experiment: Experiment) -> Self {
        Self {
            experiment,
            tau: None,
            t_total: None,
            t_list: None,
            t_max: None,
            dt: None,
            beta: None,
            alpha: None,
            eta: None,
            n_max: None,
            reps_list: None,
            reps: None,
            grid: None,
            output_dir: None,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(tau) = self.tau {
            if !(tau > 0.0) {
                bail!("tau must be > 0, got {tau}");
            }
        }
        if let Some(eta) = self.eta {
            if !(0.0..=1.0).contains(&eta) {
                bail!("eta must be in [0, 1], got {eta}");
            }
        }
        if let Some(n_max) = self.n_max {
            if n_max == 0 {
                bail!("n_max must be >= 1");
            }
        }
        if let Some(g) = &self.grid {
            if g.resolution < 2 || g.x_min >= g.x_max || g.p_min >= g.p_max {
                bail!("grid must have resolution >= 2 and increasing bounds");
            }
        }
        if let Some(ts) = &self.t_list {
            if ts.iter().any(|t| *t <= 0.0) {
                bail!("t_list entries must be > 0");
            }
        }
        Ok(())
    }
}
