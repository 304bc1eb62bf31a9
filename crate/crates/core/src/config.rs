//! Versioned TOML run configuration.
//!
//! ```toml
//! schema = 1
//!
//! [graph]
//! h = 1.0
//! extent = 10
//! family = { kind = "square", spacing = "spacing-is-h" }
//!
//! [sweep]
//! regime = "euclidean"        # euclidean | graph | ldp
//! x = [0.0, 0.0]
//! y = [1.0, 0.0]
//! t = 1.0
//! beta = 0.5
//! h = [0.2, 0.1, 0.05]
//! threshold = 1.5
//! ```
//!
//! Unknown keys anywhere are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{GeneratorSpec, Point};
use crate::kernel::Disk;
use crate::regimes::{Regime, SweepConfig};
use crate::{Error, Result};

pub const CONFIG_SCHEMA: u32 = 1;

fn default_validation_tol() -> f64 {
    1e-9
}

fn default_max_vertices() -> usize {
    6_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    /// Isoradiality tolerance relative to the circumdiameter.
    #[serde(default = "default_validation_tol")]
    pub tol: f64,
}

impl Default for ValidationSection {
    fn default() -> Self {
        Self {
            tol: default_validation_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub regime: Regime,
    pub x: Point,
    /// Second point; unused by the LDP regime.
    pub y: Option<Point>,
    /// `t` for the kernel regimes, `T` for the LDP regime.
    pub t: f64,
    pub beta: f64,
    /// Strictly decreasing mesh sizes.
    pub h: Vec<f64>,
    /// Defaults to `1e-6` relative (kernel regimes) or `1e-8` absolute (LDP).
    pub tol: Option<f64>,
    pub threshold: f64,
    #[serde(default = "default_max_vertices")]
    pub max_vertices: usize,
    /// Target disk of the LDP regime.
    pub region: Option<Disk>,
    /// Optional walk cross-check of the LDP event probabilities.
    pub monte_carlo: Option<MonteCarloSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub graph: GeneratorSpec,
    #[serde(default)]
    pub validation: ValidationSection,
    pub sweep: Option<SweepSection>,
}

/// A sweep ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub regime: Regime,
    pub config: SweepConfig,
    pub region: Option<Disk>,
    pub monte_carlo: Option<MonteCarloSection>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!(
                "unsupported schema {} (expected {CONFIG_SCHEMA})",
                self.schema
            )));
        }
        if !(self.validation.tol > 0.0) {
            return Err(Error::Config("validation.tol must be positive".into()));
        }
        if self.sweep.is_some() {
            self.sweep_plan()?;
        }
        Ok(())
    }

    /// Resolves the `[sweep]` section against the graph family.
    pub fn sweep_plan(&self) -> Result<SweepPlan> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("missing [sweep] section".into()))?;
        let y = match (s.regime, s.y) {
            (Regime::Ldp, _) => s.x,
            (_, Some(y)) => y,
            (_, None) => return Err(Error::Config("sweep.y is required".into())),
        };
        if s.regime == Regime::Ldp && s.region.is_none() {
            return Err(Error::Config("the ldp regime needs sweep.region".into()));
        }
        if s.regime != Regime::Ldp && (s.region.is_some() || s.monte_carlo.is_some()) {
            return Err(Error::Config(
                "sweep.region and sweep.monte_carlo apply to the ldp regime only".into(),
            ));
        }
        let tol = s.tol.unwrap_or(match s.regime {
            Regime::Ldp => 1e-8,
            _ => 1e-6,
        });
        let config = SweepConfig {
            family: self.graph.family.clone(),
            x: s.x,
            y,
            t: s.t,
            beta: s.beta,
            h_sequence: s.h.clone(),
            tol,
            threshold: s.threshold,
            max_vertices: s.max_vertices,
        };
        config.validate(s.regime)?;
        Ok(SweepPlan {
            regime: s.regime,
            config,
            region: s.region,
            monte_carlo: s.monte_carlo.clone(),
        })
    }
}
