//! Central finite-difference check of the analytic gradients.
//!
//! For every coordinate `w` checked, the numeric gradient is
//! `(L(w + eps) - L(w - eps)) / (2 eps)` on a single example's loss (evaluated in
//! double-double precision), and the error is
//! `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`. Dense groups are checked
//! on every coordinate; table groups on every row the example touches plus a few
//! untouched rows, whose analytic gradient is zero by construction.

use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;

use super::dd::DoubleDouble;
use super::network::{Gradients, ResolvedExample};
use super::params::{ModelParams, ParamGroup};
use super::reference;
use crate::rng;

const DENOM_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Untouched rows sampled per table and example.
    pub untouched_rows: usize,
    pub seed: u64,
    /// Negative control: distorts the analytic gradient of this group before comparing.
    pub corrupt: Option<ParamGroup>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { eps: 1e-5, untouched_rows: 3, seed: 42, corrupt: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCoordinate {
    pub example: usize,
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCheck {
    pub group: &'static str,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub worst: Option<WorstCoordinate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub eps: f64,
    pub examples: usize,
    pub groups: Vec<GroupCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }

    /// Whether every group with at least one checked coordinate is below `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.groups.iter().all(|g| g.max_rel_error < tol)
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<10} {:>8} {:>14}  worst coordinate\n", "group", "coords", "max rel err");
        for g in &self.groups {
            let worst = g.worst.as_ref().map_or_else(
                || "-".to_string(),
                |w| format!("ex {} {}[{}] analytic {:.6e} numeric {:.6e}", w.example, w.tensor, w.index, w.analytic, w.numeric),
            );
            out.push_str(&format!("{:<10} {:>8} {:>14.3e}  {worst}\n", g.group, g.coordinates, g.max_rel_error));
        }
        out
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOM_FLOOR)
}

struct Tracker {
    coordinates: usize,
    max: f64,
    worst: Option<WorstCoordinate>,
}

impl Tracker {
    fn record(&mut self, example: usize, tensor: &str, index: usize, analytic: f64, numeric: f64) {
        self.coordinates += 1;
        let err = relative_error(analytic, numeric);
        if err > self.max || self.worst.is_none() {
            self.max = self.max.max(err);
            self.worst = Some(WorstCoordinate { example, tensor: tensor.to_string(), index, analytic, numeric });
        }
    }
}

fn corrupt(a: f64) -> f64 {
    a * 1.01 + 1e-6
}

/// Adds seeded `Uniform(-scale, scale)` noise to every dense coordinate. Checking at
/// such a point keeps zero-initialized tensors (the gate output layer) from making
/// upstream gradients vanish and the check vacuous.
pub fn jitter_dense<R: Rng + ?Sized>(params: &mut ModelParams, scale: f64, rng: &mut R) {
    for (_, _, t) in params.dense.tensors_mut() {
        t.iter_mut().for_each(|w| *w += rng.random_range(-scale..=scale));
    }
}

/// `loss` is evaluated in double-double precision so the difference of two nearly
/// equal losses keeps its significant digits even for gradients around 1e-8.
fn central_difference(
    params: &mut ModelParams,
    eps: f64,
    set: impl Fn(&mut ModelParams, f64),
    orig: f64,
    loss: impl Fn(&ModelParams) -> DoubleDouble,
) -> f64 {
    let (up, down) = (orig + eps, orig - eps);
    set(params, up);
    let plus = loss(params);
    set(params, down);
    let minus = loss(params);
    set(params, orig);
    let step = DoubleDouble::new(up) - DoubleDouble::new(down);
    ((plus - minus) / step).to_f64()
}

/// Checks every parameter group on each of `examples`.
pub fn grad_check(params: &ModelParams, examples: &[ResolvedExample], cfg: &GradCheckConfig) -> GradCheckReport {
    let mut work = params.clone();
    let mut trackers: Vec<Tracker> =
        ParamGroup::ALL.iter().map(|_| Tracker { coordinates: 0, max: 0.0, worst: None }).collect();
    let slot_of = |g: ParamGroup| ParamGroup::ALL.iter().position(|&x| x == g).expect("group listed");
    let mut rng = rng::stream(cfg.seed, "grad-check", 0);

    for (ei, ex) in examples.iter().enumerate() {
        let trace = params.forward(ex);
        let grads: Gradients = params.backward(ex, &trace);
        let analytic = |group: ParamGroup, a: f64| if cfg.corrupt == Some(group) { corrupt(a) } else { a };

        let full = |p: &ModelParams| reference::loss::<DoubleDouble>(p, ex);
        let input: Vec<DoubleDouble> = reference::backbone_input(params, ex);
        let head = |p: &ModelParams| reference::head_loss(p, &input, ex.label);

        let dense = grads.dense.tensors();
        for (ti, (group, name, g)) in dense.iter().enumerate() {
            for (i, &a) in g.iter().enumerate() {
                let set = |p: &mut ModelParams, v: f64| p.dense.tensors_mut().swap_remove(ti).2[i] = v;
                let orig = params.dense.tensors()[ti].2[i];
                let num = if *group == ParamGroup::Backbone {
                    central_difference(&mut work, cfg.eps, set, orig, head)
                } else {
                    central_difference(&mut work, cfg.eps, set, orig, full)
                };
                trackers[slot_of(*group)].record(ei, name, i, analytic(*group, a), num);
            }
        }

        for group in [ParamGroup::HidTable, ParamGroup::SidTable, ParamGroup::UserTable] {
            let rows = grads.rows(group).expect("table group");
            let table_rows = params.table(group).expect("table group").rows();
            let dim = params.table(group).expect("table group").dim();
            let touched: BTreeSet<usize> = rows.touched().collect();
            let mut check: Vec<usize> = touched.iter().copied().collect();
            if touched.len() < table_rows {
                for _ in 0..cfg.untouched_rows {
                    loop {
                        let r = rng.random_range(0..table_rows);
                        if !touched.contains(&r) {
                            check.push(r);
                            break;
                        }
                    }
                }
            }
            for row in check {
                let g = rows.get(row);
                for j in 0..dim {
                    let a = g.map_or(0.0, |g| g[j]);
                    let set = |p: &mut ModelParams, v: f64| {
                        p.table_mut(group).expect("table group").row_mut(row).expect("row in range")[j] = v;
                    };
                    let orig = params.table(group).expect("table group").row(row)[j];
                    let num = central_difference(&mut work, cfg.eps, set, orig, full);
                    trackers[slot_of(group)].record(ei, group.name(), row * dim + j, analytic(group, a), num);
                }
            }
        }
    }

    GradCheckReport {
        eps: cfg.eps,
        examples: examples.len(),
        groups: ParamGroup::ALL
            .iter()
            .zip(trackers)
            .map(|(g, t)| GroupCheck { group: g.name(), coordinates: t.coordinates, max_rel_error: t.max, worst: t.worst })
            .collect(),
    }
}
