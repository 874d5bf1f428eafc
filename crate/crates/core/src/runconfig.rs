//! Run configuration files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DatasetConfig;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::trainer::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManipulateConfig {
    /// Semantic sources (grid rows).
    pub n_semantic: usize,
    /// Variation sources (grid columns).
    pub n_variation: usize,
    /// Interpolation weights; `None` means `1.0, 0.9, ..., 0.1`.
    pub steps: Option<Vec<f64>>,
}

impl Default for ManipulateConfig {
    fn default() -> Self {
        ManipulateConfig {
            n_semantic: 5,
            n_variation: 6,
            steps: None,
        }
    }
}

impl ManipulateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_semantic == 0 || self.n_variation == 0 {
            return Err(Error::Config(
                "manipulate needs at least one source of each kind".into(),
            ));
        }
        if let Some(s) = &self.steps {
            if s.is_empty() || s.iter().any(|i| !(0.0..=1.0).contains(i)) {
                return Err(Error::Config(
                    "manipulate.steps must be nonempty and within [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Split protocol shared by training and evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    /// Fraction of each source domain used for training; the rest is held out.
    pub train_fraction: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            train_fraction: 0.8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub manipulate: ManipulateConfig,
    pub protocol: ProtocolConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        self.manipulate.validate()?;
        let f = self.protocol.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!(
                "protocol.train_fraction must be in (0, 1), got {f}"
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes")
    }
}
