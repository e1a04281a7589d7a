//! Experiment configuration: one flat JSON document.

use std::path::{Path, PathBuf};

use glbai_core::{AlphaMode, LinkKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Glgape,
    Gape,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Glgape => "glgape",
            Algorithm::Gape => "gape",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    K,
    #[serde(rename = "d")]
    D,
    #[serde(rename = "epsilon")]
    Epsilon,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::K => "K",
            SweepAxis::D => "d",
            SweepAxis::Epsilon => "epsilon",
        }
    }
}

fn default_algorithm() -> Algorithm {
    Algorithm::Glgape
}

fn default_link() -> LinkKind {
    LinkKind::Logistic
}

fn default_alpha() -> AlphaMode {
    AlphaMode::Empirical
}

fn default_replications() -> usize {
    50
}

fn default_max_steps() -> u64 {
    200_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default = "default_link")]
    pub link_kind: LinkKind,
    /// Number of arms (synthetic instances; checked against the file otherwise).
    #[serde(rename = "K", default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub d: Option<usize>,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default = "default_alpha")]
    pub alpha_mode: AlphaMode,
    #[serde(default = "default_replications")]
    pub num_replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    /// Features file (`arm_id,f1,...,fd`); synthetic instances when absent.
    #[serde(default)]
    pub features_csv: Option<PathBuf>,
    /// Single-row parameter file; required to simulate rewards from a file.
    #[serde(default)]
    pub theta_csv: Option<PathBuf>,
    /// Parameter-norm bound `S` for file instances (defaults to `‖θ‖`).
    #[serde(default)]
    pub param_bound: Option<f64>,
    #[serde(default)]
    pub sweep_axis: Option<SweepAxis>,
    #[serde(default)]
    pub sweep_values: Option<Vec<f64>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Check confidence-set coverage against the true means every round.
    #[serde(default)]
    pub track_coverage: bool,
}

fn field(name: &str, message: impl Into<String>) -> CliError {
    CliError::Config(format!("config field `{name}`: {}", message.into()))
}

impl ExperimentConfig {
    /// Reads and validates a config file. Relative CSV paths are resolved
    /// against the file's directory; `GLBAI_SEED` overrides `base_seed`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.features_csv, &mut cfg.theta_csv].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Ok(seed) = std::env::var("GLBAI_SEED") {
            cfg.base_seed = seed
                .trim()
                .parse()
                .map_err(|_| field("GLBAI_SEED", format!("not an unsigned 64-bit integer: {seed:?}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.num_replications < 1 {
            return Err(field("num_replications", "must be >= 1"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(field("epsilon", format!("must be > 0, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(field("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        if self.features_csv.is_none() {
            match self.k {
                None => return Err(field("K", "required for synthetic instances")),
                Some(k) if k < 2 => return Err(field("K", format!("must be >= 2, got {k}"))),
                _ => {}
            }
            match self.d {
                None => return Err(field("d", "required for synthetic instances")),
                Some(0) => return Err(field("d", "must be >= 1")),
                _ => {}
            }
            if self.theta_csv.is_some() {
                return Err(field("theta_csv", "given without features_csv"));
            }
        } else if self.theta_csv.is_none() {
            return Err(field("theta_csv", "required with features_csv to simulate rewards"));
        }
        if let Some(s) = self.param_bound {
            if !(s.is_finite() && s > 0.0) {
                return Err(field("param_bound", format!("must be > 0, got {s}")));
            }
        }
        if let Some(d) = self.d {
            let cap = (d as f64 / std::f64::consts::E).min(1.0);
            if self.algorithm == Algorithm::Glgape && self.delta >= cap {
                return Err(field("delta", format!("must be below min(1, d/e) = {cap:.4}")));
            }
        }
        if self.max_steps < 2 {
            return Err(field("max_steps", "must be >= 2"));
        }
        match (&self.sweep_axis, &self.sweep_values) {
            (None, None) => {}
            (Some(_), None) => return Err(field("sweep_values", "required with sweep_axis")),
            (None, Some(_)) => return Err(field("sweep_axis", "required with sweep_values")),
            (Some(axis), Some(values)) => {
                if values.is_empty() {
                    return Err(field("sweep_values", "must not be empty"));
                }
                for &v in values {
                    let ok = match axis {
                        SweepAxis::K => v.fract() == 0.0 && v >= 2.0,
                        SweepAxis::D => v.fract() == 0.0 && v >= 1.0,
                        SweepAxis::Epsilon => v.is_finite() && v > 0.0,
                    };
                    if !ok {
                        return Err(field("sweep_values", format!("{v} is not a valid {}", axis.as_str())));
                    }
                }
                if *axis != SweepAxis::Epsilon && self.features_csv.is_some() {
                    return Err(field("sweep_axis", "K and d sweeps need synthetic instances"));
                }
            }
        }
        Ok(())
    }

    /// The config with the sweep axis pinned to `value`.
    pub fn at(&self, axis: SweepAxis, value: f64) -> Result<Self, CliError> {
        let mut c = self.clone();
        match axis {
            SweepAxis::K => c.k = Some(value as usize),
            SweepAxis::D => c.d = Some(value as usize),
            SweepAxis::Epsilon => c.epsilon = value,
        }
        c.sweep_axis = None;
        c.sweep_values = None;
        c.validate()?;
        Ok(c)
    }
}
