#![allow(dead_code)]

use std::path::Path;

use sha2::{Digest, Sha256};

pub fn sha256_hex(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Single-level k-means written without the library: nearest centroid with ties to
/// the lower index, mean update, empty clusters moved to the farthest points, stop
/// when the relative MSE improvement is at most `tol`. Returns the final centroids
/// and the MSE against them.
pub fn kmeans_oracle(points: &[Vec<f64>], init: Vec<Vec<f64>>, max_iters: usize, tol: f64) -> (Vec<Vec<f64>>, f64) {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let closest = |c: &[Vec<f64>], p: &[f64]| {
        let mut best = (0, f64::INFINITY);
        for (j, cj) in c.iter().enumerate() {
            let d = dist(p, cj);
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    };
    let k = init.len();
    let dim = points[0].len();
    let mut c = init;
    let mut prev = f64::INFINITY;
    for _ in 0..max_iters {
        let near: Vec<(usize, f64)> = points.iter().map(|p| closest(&c, p)).collect();
        let mse = near.iter().map(|n| n.1).sum::<f64>() / points.len() as f64;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &(j, _)) in points.iter().zip(&near) {
            counts[j] += 1;
            for t in 0..dim {
                sums[j][t] += p[t];
            }
        }
        let mut far: Vec<usize> = (0..points.len()).collect();
        far.sort_by(|&a, &b| near[b].1.total_cmp(&near[a].1).then(a.cmp(&b)));
        let mut next_far = far.into_iter();
        for j in 0..k {
            if counts[j] == 0 {
                c[j] = points[next_far.next().unwrap()].clone();
            } else {
                c[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        let stop = prev.is_finite() && prev - mse <= tol * prev;
        prev = mse;
        if stop {
            break;
        }
    }
    let mse = points.iter().map(|p| closest(&c, p).1).sum::<f64>() / points.len() as f64;
    (c, mse)
}
