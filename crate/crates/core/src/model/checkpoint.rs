//! Model checkpoints as a single JSON document.
//!
//! ```text
//! { "format": "sidcoord.model", "version": 1,
//!   "params":  { config, flags, seed, normalizer, hid, sid: { vocab, table }, user, dense },
//!   "trainer": { step, epochs_done, loss_curve, <Adam moments> },
//!   "train_config": { epochs, lr, batch_size, seed, beta1, beta2, eps } }
//! ```
//!
//! Floats are written with the shortest round-trip representation, so loading a
//! saved checkpoint reproduces every parameter bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::train::{TrainConfig, TrainerState};
use super::ModelError;

pub const CHECKPOINT_FORMAT: &str = "sidcoord.model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub params: ModelParams,
    pub trainer: TrainerState,
    pub train_config: TrainConfig,
}

impl Checkpoint {
    pub fn new(params: ModelParams, trainer: TrainerState, train_config: TrainConfig) -> Self {
        Self { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, params, trainer, train_config }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self, ModelError> {
        let bad = |reason: String| ModelError::Checkpoint { path: path.to_path_buf(), reason };
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(bad(format!("format `{}` is not `{CHECKPOINT_FORMAT}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {}", ck.version)));
        }
        ck.params.config.validate().map_err(|e| bad(e.to_string()))?;
        let t = ck.params.dense.autodis.temperature();
        if !(t > 0.0 && t.is_finite()) {
            return Err(bad(format!("AutoDis temperature must be positive, got {t}")));
        }
        if !ck.params.is_finite() {
            return Err(bad("non-finite parameters".into()));
        }
        Ok(ck)
    }
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), ModelError> {
    fs::write(path, ck.to_json()).map_err(|source| ModelError::CheckpointIo { path: path.to_path_buf(), source })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let text =
        fs::read_to_string(path).map_err(|source| ModelError::CheckpointIo { path: path.to_path_buf(), source })?;
    Checkpoint::from_json(&text, path)
}
