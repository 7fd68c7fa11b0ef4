//! Model checkpointing. The binary encoding is exact for `f64`, so a
//! save/load cycle reproduces parameters and predictions bit for bit.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::corpus::DataManifest;
use crate::error::{Result, SermlError};
use crate::params::ParamStore;
use crate::trainer::Model;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub manifest: DataManifest,
    pub params: ParamStore,
    pub epoch: usize,
    pub rng: ChaCha8Rng,
}

impl Checkpoint {
    pub fn from_model(model: &Model, epoch: usize, rng: ChaCha8Rng) -> Self {
        Checkpoint {
            config: model.config.clone(),
            manifest: model.manifest.clone(),
            params: model.store.clone(),
            epoch,
            rng,
        }
    }

    pub fn to_model(&self) -> Result<Model> {
        Model::from_parts(
            self.config.clone(),
            self.manifest.clone(),
            self.params.clone(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = bincode::serialize(self).map_err(|e| SermlError::Serde(e.to_string()))?;
        fs::write(path, bytes).map_err(|e| SermlError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| SermlError::io(path, e))?;
        bincode::deserialize(&bytes).map_err(|e| SermlError::Serde(e.to_string()))
    }
}
