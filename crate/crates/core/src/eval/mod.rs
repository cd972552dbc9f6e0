//! Evaluation: AUC/UAUC over all examples and over the long-tail slice, plus the
//! gate-vs-popularity table.

mod gate;
mod metrics;
mod slice;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gate::{average_ranks, gate_report, spearman, GateDecile, GateReport};
pub use metrics::{auc, uauc, Uauc};
pub use slice::{slice_tail, tail_threshold};

use crate::data::{Example, Item, ItemStats};
use crate::model::{FeatureIndex, ModelParams};

/// Default long-tail slice: bottom 30% of catalog items by exposure.
pub const DEFAULT_TAIL_PERCENTILE: f64 = 30.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gate report needs a model with gating enabled")]
    GateDisabled,
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("evaluation log is empty")]
    EmptyLog,
}

/// Metrics of one model on one evaluation log. Metrics are `None` when undefined
/// (a single class in the slice).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc_all: Option<f64>,
    pub uauc_all: Option<f64>,
    pub auc_tail: Option<f64>,
    pub uauc_tail: Option<f64>,
    pub n_examples: usize,
    pub n_users: usize,
    pub n_tail_examples: usize,
    pub n_tail_users: usize,
    pub uauc_excluded_users: usize,
    pub uauc_tail_excluded_users: usize,
    pub tail_percentile: f64,
    pub tail_threshold: u64,
    pub gate: Option<GateReport>,
}

pub(crate) fn fmt_metric(m: Option<f64>) -> String {
    m.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<10} {:>8} {:>8} {:>9} {:>7}\n", "slice", "AUC", "UAUC", "examples", "users"));
        out.push_str(&format!(
            "{:<10} {:>8} {:>8} {:>9} {:>7}\n",
            "ALL",
            fmt_metric(self.auc_all),
            fmt_metric(self.uauc_all),
            self.n_examples,
            self.n_users
        ));
        out.push_str(&format!(
            "{:<10} {:>8} {:>8} {:>9} {:>7}\n",
            "Long-tail",
            fmt_metric(self.auc_tail),
            fmt_metric(self.uauc_tail),
            self.n_tail_examples,
            self.n_tail_users
        ));
        out.push_str(&format!(
            "long-tail: exposure <= {} (p{}); UAUC excluded users: {} all, {} tail\n",
            self.tail_threshold, self.tail_percentile, self.uauc_excluded_users, self.uauc_tail_excluded_users
        ));
        if let Some(g) = &self.gate {
            out.push_str(&g.table());
        }
        out
    }
}

/// Scores `log` with `params` and reports overall and long-tail metrics. The gate
/// table is included whenever the model has an active gate.
pub fn evaluate(
    params: &ModelParams,
    index: &FeatureIndex,
    catalog: &[Item],
    stats: &ItemStats,
    log: &[Example],
    tail_percentile: f64,
) -> Result<EvalReport, EvalError> {
    if log.is_empty() {
        return Err(EvalError::EmptyLog);
    }
    let scores: Vec<f64> = log.par_iter().map(|ex| params.predict(&index.resolve(ex, params))).collect();
    let labels: Vec<u8> = log.iter().map(|e| e.label).collect();
    let users: Vec<u64> = log.iter().map(|e| e.user_key.0).collect();
    let all = uauc(&scores, &labels, &users);

    let tail = slice_tail(log, catalog, stats, tail_percentile);
    let pick = |v: &[f64]| tail.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let t_scores = pick(&scores);
    let t_labels: Vec<u8> = tail.iter().map(|&i| labels[i]).collect();
    let t_users: Vec<u64> = tail.iter().map(|&i| users[i]).collect();
    let tail_u = uauc(&t_scores, &t_labels, &t_users);

    let gate = if params.flags.gate_active() { Some(gate_report(params, catalog, stats)?) } else { None };
    Ok(EvalReport {
        auc_all: auc(&scores, &labels),
        uauc_all: all.value,
        auc_tail: auc(&t_scores, &t_labels),
        uauc_tail: tail_u.value,
        n_examples: log.len(),
        n_users: all.eligible_users + all.excluded_users,
        n_tail_examples: tail.len(),
        n_tail_users: tail_u.eligible_users + tail_u.excluded_users,
        uauc_excluded_users: all.excluded_users,
        uauc_tail_excluded_users: tail_u.excluded_users,
        tail_percentile,
        tail_threshold: tail_threshold(catalog, stats, tail_percentile),
        gate,
    })
}

/// Relative change in percent, `100 (value - reference) / reference`.
pub fn percent_delta(value: f64, reference: f64) -> f64 {
    100.0 * (value - reference) / reference
}

fn with_delta(value: Option<f64>, reference: Option<f64>) -> String {
    match (value, reference) {
        (Some(v), Some(r)) => format!("{v:.4} ({:+.2}%)", percent_delta(v, r)),
        (v, _) => fmt_metric(v),
    }
}

/// Ablation table: `ALL` and `Long-tail` AUC/UAUC per row, with the AUC columns of
/// every row after the first annotated by their percentage change relative to the
/// first row.
pub fn ablation_table(rows: &[(String, EvalReport)]) -> String {
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$}  {:^35}  {:^35}\n", "", "ALL", "Long-tail");
    out.push_str(&format!("{:<width$}  {:>18} {:>16}  {:>18} {:>16}\n", "Model", "AUC", "UAUC", "AUC", "UAUC"));
    let reference = rows.first().map(|r| &r.1);
    for (i, (name, r)) in rows.iter().enumerate() {
        let (auc_all, auc_tail) = match (i, reference) {
            (0, _) | (_, None) => (fmt_metric(r.auc_all), fmt_metric(r.auc_tail)),
            (_, Some(f)) => (with_delta(r.auc_all, f.auc_all), with_delta(r.auc_tail, f.auc_tail)),
        };
        out.push_str(&format!(
            "{name:<width$}  {auc_all:>18} {:>16}  {auc_tail:>18} {:>16}\n",
            fmt_metric(r.uauc_all),
            fmt_metric(r.uauc_tail)
        ));
    }
    out
}
