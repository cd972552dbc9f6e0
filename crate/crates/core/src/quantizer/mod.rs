//! Residual k-means (RQ-KMeans) codebooks.
//!
//! Level 1 clusters the raw content embeddings; level `i > 1` clusters what is left
//! after subtracting the centroids chosen at levels `1..i`. Each item is then described
//! by one centroid index per level.

mod io;
mod kmeans;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{read_codebook, write_codebook, write_codebook_json, CODEBOOK_FORMAT_VERSION, CODEBOOK_MAGIC};
pub use kmeans::{kmeans_plus_plus, kmeans_step, lloyd, nearest, KMeansConfig, LloydFit, StepOutput};

use crate::linalg::Matrix;
use crate::rng;

#[derive(Debug, Error)]
pub enum QuantizerError {
    #[error("need at least {required} distinct points to fit {required} centroids, got {distinct} (short by {deficit})")]
    InsufficientDistinctPoints { distinct: usize, required: usize, deficit: usize },
    #[error("cannot fit {clusters} clusters to {points} points")]
    TooFewPoints { points: usize, clusters: usize },
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("codebook must contain at least one centroid")]
    EmptyCodebook,
    #[error("levels must be at least 1")]
    NoLevels,
    #[error("expected {expected} ids, got {actual}")]
    WrongIdCount { expected: usize, actual: usize },
    #[error("id {id} at level {level} is outside the codebook (size {codebook_size})")]
    IdOutOfRange { level: usize, id: usize, codebook_size: usize },
    #[error("malformed codebook file: {0}")]
    Format(String),
    #[error("codebook i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// `L` residual codebooks of `K` centroids each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookStack {
    levels: usize,
    codebook_size: usize,
    dim: usize,
    seed: u64,
    centroids: Vec<Matrix>,
    fit_stats: Vec<f64>,
}

impl CodebookStack {
    /// Assembles a stack from explicit codebooks, checking shapes and finiteness.
    pub fn from_parts(centroids: Vec<Matrix>, fit_stats: Vec<f64>, seed: u64) -> Result<Self, QuantizerError> {
        let first = centroids.first().ok_or(QuantizerError::NoLevels)?;
        let (k, dim) = (first.rows(), first.cols());
        if k == 0 {
            return Err(QuantizerError::EmptyCodebook);
        }
        for level in &centroids {
            if level.rows() != k {
                return Err(QuantizerError::Format(format!(
                    "levels disagree on codebook size ({} vs {k})",
                    level.rows()
                )));
            }
            if level.cols() != dim {
                return Err(QuantizerError::DimensionMismatch { expected: dim, actual: level.cols() });
            }
            if let Some(row) = level.iter_rows().position(|r| r.iter().any(|x| !x.is_finite())) {
                return Err(QuantizerError::NonFinite { row });
            }
        }
        if fit_stats.len() != centroids.len() {
            return Err(QuantizerError::Format(format!(
                "{} fit stats for {} levels",
                fit_stats.len(),
                centroids.len()
            )));
        }
        Ok(Self { levels: centroids.len(), codebook_size: k, dim, seed, centroids, fit_stats })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Centroids of `level` (0-based).
    pub fn codebook(&self, level: usize) -> &Matrix {
        &self.centroids[level]
    }

    /// Mean squared quantization error after each level, on the fitting data.
    pub fn fit_stats(&self) -> &[f64] {
        &self.fit_stats
    }

    /// Greedy residual encoding: one nearest-centroid index per level.
    pub fn encode(&self, embedding: &[f64]) -> Result<Vec<usize>, QuantizerError> {
        if embedding.len() != self.dim {
            return Err(QuantizerError::DimensionMismatch { expected: self.dim, actual: embedding.len() });
        }
        let mut residual = embedding.to_vec();
        let mut ids = Vec::with_capacity(self.levels);
        for codebook in &self.centroids {
            let (idx, _) = nearest(&residual, codebook);
            for (r, c) in residual.iter_mut().zip(codebook.row(idx)) {
                *r -= c;
            }
            ids.push(idx);
        }
        Ok(ids)
    }

    /// Sum of the selected centroids.
    pub fn reconstruct(&self, ids: &[usize]) -> Result<Vec<f64>, QuantizerError> {
        if ids.len() != self.levels {
            return Err(QuantizerError::WrongIdCount { expected: self.levels, actual: ids.len() });
        }
        let mut out = vec![0.0; self.dim];
        for (level, (&id, codebook)) in ids.iter().zip(&self.centroids).enumerate() {
            if id >= self.codebook_size {
                return Err(QuantizerError::IdOutOfRange { level, id, codebook_size: self.codebook_size });
            }
            for (o, c) in out.iter_mut().zip(codebook.row(id)) {
                *o += c;
            }
        }
        Ok(out)
    }
}

/// Seed used for k-means++ at `level` (0-based) under the fit seed.
pub fn level_seed(seed: u64, level: usize) -> u64 {
    rng::derive_seed(seed, "quantizer", level as u64)
}

fn count_distinct(points: &Matrix) -> usize {
    let canon = |x: f64| if x == 0.0 { 0u64 } else { x.to_bits() };
    points
        .iter_rows()
        .map(|r| r.iter().map(|&x| canon(x)).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

/// Fits `levels` residual codebooks of `codebook_size` centroids to `embeddings`.
pub fn fit(
    embeddings: &Matrix,
    levels: usize,
    codebook_size: usize,
    config: &KMeansConfig,
) -> Result<CodebookStack, QuantizerError> {
    if levels == 0 {
        return Err(QuantizerError::NoLevels);
    }
    if codebook_size == 0 {
        return Err(QuantizerError::EmptyCodebook);
    }
    if let Some(row) = embeddings.iter_rows().position(|r| r.iter().any(|x| !x.is_finite())) {
        return Err(QuantizerError::NonFinite { row });
    }
    let distinct = count_distinct(embeddings);
    if distinct < codebook_size {
        return Err(QuantizerError::InsufficientDistinctPoints {
            distinct,
            required: codebook_size,
            deficit: codebook_size - distinct,
        });
    }

    let mut residual = embeddings.clone();
    let mut centroids = Vec::with_capacity(levels);
    let mut fit_stats = Vec::with_capacity(levels);
    for level in 0..levels {
        let mut rng = rng::stream(config.seed, "quantizer", level as u64);
        let init = kmeans_plus_plus(&residual, codebook_size, &mut rng);
        let fit = lloyd(&residual, init, config.max_iters, config.tol)?;
        for (i, &c) in fit.assignments.iter().enumerate() {
            for (r, x) in residual.row_mut(i).iter_mut().zip(fit.centroids.row(c)) {
                *r -= x;
            }
        }
        fit_stats.push(fit.mse);
        centroids.push(fit.centroids);
    }
    CodebookStack::from_parts(centroids, fit_stats, config.seed)
}
