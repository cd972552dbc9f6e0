//! Mean gate value per exposure decile.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::data::{Item, ItemStats};
use crate::model::{GateFeatures, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDecile {
    /// 0 is the least exposed tenth of the catalog.
    pub decile: usize,
    pub n_items: usize,
    pub mean_exposure: f64,
    pub mean_g: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub deciles: Vec<GateDecile>,
    /// Spearman correlation between decile index and `mean_g`; `None` when `mean_g`
    /// is constant.
    pub spearman: Option<f64>,
}

impl GateReport {
    pub fn table(&self) -> String {
        let mut out = format!("{:>6} {:>7} {:>12} {:>8} {:>17}\n", "decile", "items", "mean expo", "mean g", "95% CI");
        for d in &self.deciles {
            out.push_str(&format!(
                "{:>6} {:>7} {:>12.1} {:>8.4} [{:.4}, {:.4}]\n",
                d.decile + 1,
                d.n_items,
                d.mean_exposure,
                d.mean_g,
                d.ci_low,
                d.ci_high
            ));
        }
        match self.spearman {
            Some(r) => out.push_str(&format!("spearman(decile, mean g) = {r:.4}\n")),
            None => out.push_str("spearman(decile, mean g) = undefined (constant gate)\n"),
        }
        out
    }
}

/// Buckets catalog items into exposure deciles (ranked by exposure, ties by item key)
/// and summarizes item-level `g` per decile with a normal-approximation 95% interval.
pub fn gate_report(params: &ModelParams, catalog: &[Item], stats: &ItemStats) -> Result<GateReport, EvalError> {
    if !params.flags.gate_active() {
        return Err(EvalError::GateDisabled);
    }
    if catalog.is_empty() {
        return Err(EvalError::EmptyCatalog);
    }
    let mut items: Vec<(u64, u64, f64)> = catalog
        .iter()
        .map(|it| {
            let counts = stats.get(it.item_key);
            let g = params.item_gate(&GateFeatures::new(counts, &params.normalizer)).expect("gate is active");
            (counts.exposures, it.item_key.0, g)
        })
        .collect();
    items.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let n = items.len();
    let mut buckets: Vec<Vec<(u64, u64, f64)>> = vec![Vec::new(); 10];
    for (rank, it) in items.into_iter().enumerate() {
        buckets[rank * 10 / n].push(it);
    }
    let deciles: Vec<GateDecile> = buckets
        .iter()
        .enumerate()
        .filter(|(_, b)| !b.is_empty())
        .map(|(decile, b)| {
            let m = b.len() as f64;
            let mean_g = b.iter().map(|x| x.2).sum::<f64>() / m;
            let var = if b.len() > 1 { b.iter().map(|x| (x.2 - mean_g).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
            let half = 1.96 * var.sqrt() / m.sqrt();
            GateDecile {
                decile,
                n_items: b.len(),
                mean_exposure: b.iter().map(|x| x.0 as f64).sum::<f64>() / m,
                mean_g,
                ci_low: mean_g - half,
                ci_high: mean_g + half,
            }
        })
        .collect();
    let idx: Vec<f64> = deciles.iter().map(|d| d.decile as f64).collect();
    let g: Vec<f64> = deciles.iter().map(|d| d.mean_g).collect();
    Ok(GateReport { spearman: spearman(&idx, &g), deciles })
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("NaN"));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            ranks[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of average ranks; `None` if either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
