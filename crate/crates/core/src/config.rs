//! Run configuration, read from TOML.
//!
//! ```toml
//! [model]
//! q = 0.33
//! mu = { kind = "affine", c0 = 0.09, c1 = 0.21 }
//! sigma = { kind = "constant", s0 = 0.3 }
//! bound = { kind = "affine", c0 = 0.3, c1 = 0.3 }
//!
//! [numerics]
//! grid_dx = 0.01
//!
//! [sim]
//! n_paths = 100000
//! x0 = 1.0
//!
//! [sweep]
//! f0_range = [0.0, 1.0]
//! f1_range = [0.0, 1.0]
//! resolution = 20
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::ModelSpec;
use crate::optimizer::{Numerics, Thresholds};
use crate::simulate::SimConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// `[sim]`: the simulation settings plus an optional barrier (the solved
/// `b*` when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SimSection {
    #[serde(flatten)]
    pub config: SimConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub f0_range: [f64; 2],
    pub f1_range: [f64; 2],
    /// Points per axis.
    pub resolution: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { f0_range: [0.0, 1.0], f1_range: [0.0, 1.0], resolution: 20 }
    }
}

impl SweepConfig {
    fn axis(r: [f64; 2], n: usize) -> Vec<f64> {
        (0..n).map(|i| r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn f0_values(&self) -> Vec<f64> {
        Self::axis(self.f0_range, self.resolution)
    }

    pub fn f1_values(&self) -> Vec<f64> {
        Self::axis(self.f1_range, self.resolution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: PathBuf::from("out"), formats: vec![Format::Csv, Format::Json] }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// `[check]`: how much Monte Carlo the check suite runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub monte_carlo: bool,
    /// Paths per Monte Carlo check.
    pub n_paths: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { monte_carlo: true, n_paths: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub check: CheckConfig,
}

impl RunConfig {
    pub fn new(model: ModelSpec) -> Self {
        RunConfig {
            model,
            numerics: Numerics::default(),
            sim: SimSection::default(),
            sweep: None,
            output: OutputConfig::default(),
            thresholds: Thresholds::default(),
            check: CheckConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |s: String| Err(ConfigError::Invalid(s));
        let n = &self.numerics;
        if !(n.tol > 0.0 && n.tol < 1e-2) {
            return bad(format!("numerics.tol = {} must lie in (0, 0.01)", n.tol));
        }
        if !(n.grid_dx > 0.0 && n.grid_dx <= 0.1) {
            return bad(format!("numerics.grid_dx = {} must lie in (0, 0.1]", n.grid_dx));
        }
        if let Some(x) = n.x_hi {
            if !(x > 5.0 && x.is_finite()) {
                return bad(format!("numerics.x_hi = {x} must exceed 5"));
            }
        }
        if let Some(s) = &self.sweep {
            for (name, r) in [("f0_range", s.f0_range), ("f1_range", s.f1_range)] {
                if !(r[0] <= r[1] && r[0].is_finite() && r[1].is_finite()) {
                    return bad(format!("sweep.{name} = {r:?} is empty"));
                }
            }
            if s.resolution < 2 {
                return bad(format!("sweep.resolution = {} must be at least 2", s.resolution));
            }
        }
        if self.output.formats.is_empty() {
            return bad("output.formats is empty".into());
        }
        if let Some(b) = self.sim.barrier {
            if !(b >= 0.0) {
                return bad(format!("sim.barrier = {b} must be nonnegative"));
            }
        }
        Ok(())
    }
}
