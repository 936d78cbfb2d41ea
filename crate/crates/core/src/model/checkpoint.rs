//! Versioned JSON checkpoint: model config, every named parameter array,
//! frozen flags, seed, and the preprocessing state needed to reuse the model.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Domain, ScalingStats};
use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::network::CnnLstm;
use crate::nn::ParamStore;

pub const CHECKPOINT_FORMAT: &str = "icu-adapt-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Provenance of a trained model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub target: Option<Domain>,
    pub strategy: Option<String>,
    pub fold: Option<usize>,
    pub seed: u64,
    /// Held-out target patients of the fold that produced the model.
    pub test_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub params: ParamStore,
    pub scaling: Option<ScalingStats>,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn new(
        config: ModelConfig,
        params: ParamStore,
        scaling: Option<ScalingStats>,
        meta: CheckpointMeta,
    ) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config,
            params,
            scaling,
            meta,
        }
    }

    pub fn network(&self) -> Result<CnnLstm> {
        CnnLstm::new(self.config.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::data(format!(
                "not a checkpoint (format `{}`)",
                ck.format
            )));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::data(format!(
                "unsupported checkpoint version {}",
                ck.version
            )));
        }
        ck.config.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::usage(format!(
                "checkpoint {} not found",
                path.display()
            )));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }
}
