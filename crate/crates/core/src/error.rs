use thiserror::Error;

use crate::cli::ConfigError;
use crate::data::DataError;
use crate::embedding::EmbeddingError;
use crate::eval::EvalError;
use crate::model::ModelError;
use crate::quantizer::QuantizerError;
use crate::sid::SidError;

/// Crate-level error; each module has its own enum and converts into this one.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error(transparent)]
    Sid(#[from] SidError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io { context: context.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
