//! Lloyd iterations with k-means++ seeding.
//!
//! Assignment is computed in parallel; per-cluster sums are reduced serially in point
//! order, so results are bit-identical regardless of thread count.

use rand::Rng;
use rayon::prelude::*;

use super::QuantizerError;
use crate::linalg::{squared_distance, Matrix};

/// Settings for one k-means fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iters: usize,
    /// Stop once `(prev_mse - mse) <= tol * prev_mse`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { max_iters: 50, tol: 1e-6, seed: 0 }
    }
}

/// Result of one Lloyd iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    /// Mean squared distance of each point to its assigned *input* centroid.
    pub mse: f64,
}

/// Nearest centroid by squared Euclidean distance, ties to the lowest index.
pub fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter_rows().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub(crate) fn assign(points: &Matrix, centroids: &Matrix) -> Vec<(usize, f64)> {
    (0..points.rows())
        .into_par_iter()
        .map(|i| nearest(points.row(i), centroids))
        .collect()
}

fn validate(points: &Matrix, centroids: &Matrix) -> Result<(), QuantizerError> {
    if centroids.rows() == 0 {
        return Err(QuantizerError::EmptyCodebook);
    }
    if points.cols() != centroids.cols() {
        return Err(QuantizerError::DimensionMismatch {
            expected: centroids.cols(),
            actual: points.cols(),
        });
    }
    if centroids.rows() > points.rows() {
        return Err(QuantizerError::TooFewPoints {
            points: points.rows(),
            clusters: centroids.rows(),
        });
    }
    Ok(())
}

/// One Lloyd iteration.
///
/// Empty clusters are moved onto the points farthest from their assigned centroid,
/// taking the farthest point for the lowest-index empty cluster and so on (distance
/// ties resolved by lowest point index).
pub fn kmeans_step(points: &Matrix, centroids: &Matrix) -> Result<StepOutput, QuantizerError> {
    validate(points, centroids)?;
    let k = centroids.rows();
    let dim = points.cols();
    let nearest = assign(points, centroids);

    let mut sums = Matrix::zeros(k, dim);
    let mut counts = vec![0usize; k];
    let mut total = 0.0;
    for (i, &(c, d)) in nearest.iter().enumerate() {
        counts[c] += 1;
        total += d;
        for (s, x) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    let mse = total / points.rows() as f64;

    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    let mut new_centroids = sums;
    for c in 0..k {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            new_centroids.row_mut(c).iter_mut().for_each(|s| *s /= n);
        }
    }
    if !empty.is_empty() {
        let mut order: Vec<usize> = (0..points.rows()).collect();
        order.sort_by(|&a, &b| nearest[b].1.total_cmp(&nearest[a].1).then(a.cmp(&b)));
        for (&c, &p) in empty.iter().zip(&order) {
            new_centroids.row_mut(c).copy_from_slice(points.row(p));
        }
    }

    Ok(StepOutput {
        assignments: nearest.into_iter().map(|(c, _)| c).collect(),
        centroids: new_centroids,
        mse,
    })
}

/// k-means++ seeding: first center uniform, the rest drawn proportionally to the
/// squared distance to the closest chosen center. When every remaining point coincides
/// with a chosen center the lowest-index point is reused.
pub fn kmeans_plus_plus<R: Rng + ?Sized>(points: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    if k == 0 || n == 0 {
        return centroids;
    }
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut closest: Vec<f64> =
        (0..n).map(|i| squared_distance(points.row(i), centroids.row(0))).collect();

    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in closest.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`; fall back to the last
            // point with positive weight.
            chosen.unwrap_or_else(|| closest.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            0
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, best) in closest.iter_mut().enumerate() {
            let d = squared_distance(points.row(i), centroids.row(c));
            if d < *best {
                *best = d;
            }
        }
    }
    centroids
}

/// Outcome of running Lloyd to convergence from a given start.
#[derive(Debug, Clone)]
pub struct LloydFit {
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    /// Mean squared distance to the final centroids.
    pub mse: f64,
    /// `mse` reported by each step, in order.
    pub step_mse: Vec<f64>,
    pub iterations: usize,
}

/// Runs Lloyd iterations from `init` until the relative improvement of the step MSE
/// drops to `tol` or `max_iters` steps have run.
pub fn lloyd(points: &Matrix, init: Matrix, max_iters: usize, tol: f64) -> Result<LloydFit, QuantizerError> {
    validate(points, &init)?;
    let mut centroids = init;
    let mut step_mse = Vec::new();
    let mut prev = f64::INFINITY;
    for _ in 0..max_iters {
        let step = kmeans_step(points, &centroids)?;
        centroids = step.centroids;
        step_mse.push(step.mse);
        if prev.is_finite() && prev - step.mse <= tol * prev {
            break;
        }
        prev = step.mse;
    }
    let nearest = assign(points, &centroids);
    let mse = nearest.iter().map(|&(_, d)| d).sum::<f64>() / points.rows() as f64;
    Ok(LloydFit {
        centroids,
        assignments: nearest.into_iter().map(|(c, _)| c).collect(),
        mse,
        iterations: step_mse.len(),
        step_mse,
    })
}
