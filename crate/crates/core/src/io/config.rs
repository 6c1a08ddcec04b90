use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reasoner::{FusionMode, ReasonConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextSwitch {
    On,
    Off,
}

/// `run.json`: every key optional, unknown keys rejected.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tau: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub k: Option<usize>,
    pub threshold: Option<f64>,
    pub fusion_mode: Option<FusionMode>,
    pub context: Option<ContextSwitch>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Fills unset keys with the reasoner defaults and validates the result.
    pub fn reason_config(&self) -> Result<ReasonConfig> {
        let d = ReasonConfig::default();
        let cfg = ReasonConfig {
            tau: self.tau.unwrap_or(d.tau),
            alpha: self.alpha.unwrap_or(d.alpha),
            beta: self.beta.unwrap_or(d.beta),
            k: self.k.unwrap_or(d.k),
            threshold: self.threshold.unwrap_or(d.threshold),
            fusion_mode: self.fusion_mode.unwrap_or(d.fusion_mode),
            context: self.context.map_or(d.context, |c| c == ContextSwitch::On),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
