//! Catalog, interaction-log and item-statistics types, the synthetic generator, and
//! their line-delimited JSON files.

mod generate;
mod io;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate, GeneratorConfig, SyntheticData};
pub use io::{
    read_catalog, read_log, read_stats, write_catalog, write_log, write_stats, CATALOG_SCHEMA, LOG_SCHEMA,
    SCHEMA_VERSION, STATS_SCHEMA,
};
pub use stats::{accumulate_stats, ItemCounts, ItemStats};

use crate::sid::SemanticIdSet;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid generator config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("{path}:{line}: {reason}")]
    Malformed { path: String, line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemKey(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserKey(pub u64);

/// A catalog entry. `latent_cluster` and `idiosyncratic_bias` are generator ground
/// truth and are never read by the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_key: ItemKey,
    pub content_embedding: Vec<f64>,
    /// Filled in once the catalog has been quantized.
    #[serde(default)]
    pub sids: Option<SemanticIdSet>,
    #[serde(default)]
    pub latent_cluster: usize,
    #[serde(default)]
    pub idiosyncratic_bias: f64,
}

/// Post-click engagement recorded with an exposure. All false on non-clicks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Engagement {
    pub like: bool,
    pub share: bool,
    pub comment: bool,
}

/// One exposure of `target` to `user_key`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub user_key: UserKey,
    pub target: ItemKey,
    /// Most recent last; at most the configured history length.
    pub history: Vec<ItemKey>,
    /// 1 for a positive (click / long play), 0 otherwise.
    pub label: u8,
    pub timestamp: u64,
    #[serde(default)]
    pub engagement: Engagement,
}

impl Example {
    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}
