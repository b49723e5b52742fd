//! The run configuration file: TOML with one table per concern. Every key
//! is optional and falls back to its default. See `docs/config.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Alignment, DEFAULT_CAP};
use crate::fog::{DcpConfig, FogParams};
use crate::loss::{LossWeights, SsimConfig};
use crate::solver::SolveConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub cap: f64,
    pub median_scale: bool,
    pub alignment: Alignment,
    /// Snippet length for windowed trajectory error; 0 evaluates the whole
    /// trajectory.
    pub window: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            median_scale: true,
            alignment: Alignment::Similarity,
            window: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub solver: SolveConfig,
    pub weights: LossWeights,
    pub ssim: SsimConfig,
    pub dcp: DcpConfig,
    pub fog: FogParams,
    pub eval: EvalConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        self.solve_config().validate()?;
        self.dcp.validate()?;
        self.fog.validate()?;
        if !(self.eval.cap.is_finite() && self.eval.cap > 0.0) || self.eval.window == 1 {
            return Err(Error::InvalidConfig(format!("eval settings {:?}", self.eval)));
        }
        Ok(())
    }

    /// Solver settings with the weights and SSIM tables merged in.
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            weights: self.weights,
            ssim: self.ssim,
            ..self.solver.clone()
        }
    }
}
