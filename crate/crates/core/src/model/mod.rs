//! The ranking network and its training loop.
//!
//! Per example the model looks up the target's hashed-ID row `e_hid` and its five
//! semantic-ID rows, fuses the latter with softmax attention into `e_sid`, mixes the
//! two with a popularity-driven gate, `e_shid = g * e_hid + (1 - g) * e_sid`, adds
//! alignment features built from cosine similarities between the target's and the
//! history items' `e_sid`, and scores `[e_shid | e_user | alignment]` with a two-layer
//! backbone. Gradients are computed by hand and verified against finite differences
//! in [`gradcheck`].

use std::path::PathBuf;

use thiserror::Error;

use crate::embedding::EmbeddingError;

pub mod checkpoint;
mod dd;
#[cfg(test)]
pub(crate) mod fixture;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod network;
pub mod params;
mod reference;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, jitter_dense, GradCheckConfig, GradCheckReport, GroupCheck, WorstCoordinate};
pub use loss::{bce_with_logit, loss};
pub use network::{FeatureIndex, Gradients, ItemFeatures, ResolvedExample, Trace};
pub use params::{
    AblationFlags, AutoDisParams, BackboneParams, DenseParams, FusionParams, GateFeatures, GateNormalizer, GateParams,
    ModelConfig, ModelParams, ParamGroup,
};
pub use train::{mean_loss, train, TrainConfig, TrainerState};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("training log is empty")]
    EmptyTrainingSet,
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("checkpoint {path}: {source}")]
    CheckpointIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
