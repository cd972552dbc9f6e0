//! A scalar-generic, trace-free copy of the forward pass. The gradient checker runs it
//! in double-double precision so finite differences are not swamped by `f64` rounding
//! of the loss.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use super::dd::DoubleDouble;
use super::layers::{GATE_EPS, RESOLUTIONS};
use super::network::ResolvedExample;
use super::params::{AutoDisParams, ModelParams};
use crate::sid::Resolution;

const LEAKY_SLOPE: f64 = 0.01;

pub trait Real:
    Copy
    + PartialOrd
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
}

impl Real for f64 {
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}

impl Real for DoubleDouble {
    fn exp(self) -> Self {
        DoubleDouble::exp(self)
    }
    fn ln(self) -> Self {
        DoubleDouble::ln(self)
    }
    fn sqrt(self) -> Self {
        DoubleDouble::sqrt(self)
    }
    fn tanh(self) -> Self {
        DoubleDouble::tanh(self)
    }
}

fn r<T: Real>(x: f64) -> T {
    T::from(x)
}

fn max<T: Real>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

fn dot<T: Real>(a: &[T], b: &[f64]) -> T {
    a.iter().zip(b).fold(r(0.0), |acc, (&x, &w)| acc + x * r(w))
}

fn dot_tt<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(r(0.0), |acc, (&x, &y)| acc + x * y)
}

fn sigmoid<T: Real>(x: T) -> T {
    let one = r::<T>(1.0);
    if x >= r(0.0) {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    }
}

fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(logits[0], max);
    let e: Vec<T> = logits.iter().map(|&l| (l - m).exp()).collect();
    let total = e.iter().copied().fold(r(0.0), |a, b| a + b);
    e.into_iter().map(|x| x / total).collect()
}

fn cosine<T: Real>(a: &[T], b: &[T]) -> T {
    let na = dot_tt(a, a).sqrt();
    let nb = dot_tt(b, b).sqrt();
    let zero = r::<T>(0.0);
    if na == zero || nb == zero {
        return zero;
    }
    let c = dot_tt(a, b) / (na * nb);
    if c > r(1.0) {
        r(1.0)
    } else if c < r(-1.0) {
        r(-1.0)
    } else {
        c
    }
}

fn bce_with_logit<T: Real>(logit: T, label: u8) -> T {
    let abs = if logit < r(0.0) { -logit } else { logit };
    let softplus = max(logit, r(0.0)) + (r::<T>(1.0) + (-abs).exp()).ln();
    softplus - r::<T>(f64::from(label)) * logit
}

fn row<T: Real>(values: &[f64]) -> Vec<T> {
    values.iter().map(|&x| r(x)).collect()
}

fn e_sid<T: Real>(p: &ModelParams, rows: [usize; RESOLUTIONS]) -> Vec<T> {
    let table = &p.sid.table;
    if !p.flags.use_multires {
        return row(table.row(rows[Resolution::S3.index()]));
    }
    let f = &p.dense.fusion;
    let h = f.hidden;
    let embeds: Vec<Vec<T>> = rows.iter().map(|&i| row(table.row(i))).collect();
    let scores: Vec<T> = embeds
        .iter()
        .map(|e| {
            let act: Vec<T> = (0..h)
                .map(|j| {
                    let mut a = r::<T>(f.bias[j]);
                    for (i, &x) in e.iter().enumerate() {
                        a += x * r(f.proj[i * h + j]);
                    }
                    a.tanh()
                })
                .collect();
            dot(&act, &f.score)
        })
        .collect();
    let weights = softmax(&scores);
    (0..f.dim).map(|d| weights.iter().zip(&embeds).fold(r(0.0), |acc, (&w, e)| acc + w * e[d])).collect()
}

fn autodis<T: Real>(x: T, p: &AutoDisParams) -> Vec<T> {
    let hb = p.buckets;
    let hidden: Vec<T> = p
        .w1
        .iter()
        .zip(&p.b1)
        .map(|(&w, &b)| {
            let a = r::<T>(w) * x + r(b);
            if a > r(0.0) {
                a
            } else {
                r::<T>(LEAKY_SLOPE) * a
            }
        })
        .collect();
    let tau = r::<T>(p.temperature());
    let logits: Vec<T> =
        (0..hb).map(|k| (dot(&hidden, &p.w2[k * hb..(k + 1) * hb]) + r::<T>(p.skip) * hidden[k]) / tau).collect();
    let weights = softmax(&logits);
    (0..p.dim).map(|d| weights.iter().enumerate().fold(r(0.0), |acc, (k, &w)| acc + w * r(p.meta[k * p.dim + d]))).collect()
}

fn align<T: Real>(target: &[T], history: &[Vec<T>], p: &AutoDisParams) -> Vec<T> {
    if history.is_empty() {
        return row(&p.no_history);
    }
    let outs: Vec<Vec<T>> = history.iter().map(|h| autodis(cosine(target, h), p)).collect();
    let n = r::<T>(outs.len() as f64);
    let mut features = vec![r(0.0); 2 * p.dim];
    for j in 0..p.dim {
        features[j] = outs.iter().map(|o| o[j]).fold(outs[0][j], max);
        features[p.dim + j] = outs.iter().fold(r::<T>(0.0), |acc, o| acc + o[j]) / n;
    }
    features
}

/// Loss of one example, computed entirely in `T`.
pub fn loss<T: Real>(p: &ModelParams, ex: &ResolvedExample) -> T {
    head_loss(p, &backbone_input(p, ex), ex.label)
}

/// `[e_shid | e_user | alignment]`; independent of the backbone parameters.
pub fn backbone_input<T: Real>(p: &ModelParams, ex: &ResolvedExample) -> Vec<T> {
    let flags = p.flags;
    let e_hid: Vec<T> = row(p.hid.table.row(ex.target.hid_row));
    let target = flags.uses_sid().then(|| e_sid::<T>(p, ex.target.sid_rows));

    let g: T = if flags.hid_only {
        r(1.0)
    } else if flags.gate_active() {
        let gate = &p.dense.gate;
        let m = gate.hidden;
        let hidden: Vec<T> = (0..m)
            .map(|j| {
                let mut a = r::<T>(gate.b1[j]);
                for (i, &x) in ex.target.gate.normalized.iter().enumerate() {
                    a += r::<T>(x) * r(gate.w1[i * m + j]);
                }
                max(a, r(0.0))
            })
            .collect();
        let raw = sigmoid(dot(&hidden, &gate.w2) + r(gate.b2));
        if raw < r(GATE_EPS) {
            r(GATE_EPS)
        } else if raw > r(1.0 - GATE_EPS) {
            r(1.0 - GATE_EPS)
        } else {
            raw
        }
    } else {
        r(0.5)
    };

    let cfg = &p.config;
    let mut input: Vec<T> = Vec::with_capacity(cfg.backbone_input());
    match &target {
        Some(s) => input.extend(e_hid.iter().zip(s).map(|(&h, &s)| g * h + (r::<T>(1.0) - g) * s)),
        None => input.extend_from_slice(&e_hid),
    }
    input.extend(row::<T>(p.user.row(ex.user_row)));
    match &target {
        Some(s) if flags.alignment_active() => {
            let hist: Vec<Vec<T>> = ex.history.iter().map(|h| e_sid(p, h.sid_rows)).collect();
            input.extend(align(s, &hist, &p.dense.autodis));
        }
        _ => input.resize(cfg.backbone_input(), r(0.0)),
    }
    input
}

/// Loss of the backbone applied to a precomputed input.
pub fn head_loss<T: Real>(p: &ModelParams, input: &[T], label: u8) -> T {
    let b = &p.dense.backbone;
    let h = b.hidden;
    let hidden: Vec<T> = (0..h)
        .map(|j| {
            let mut a = r::<T>(b.b1[j]);
            for (i, &x) in input.iter().enumerate() {
                a += x * r(b.w1[i * h + j]);
            }
            max(a, r(0.0))
        })
        .collect();
    bce_with_logit(dot(&hidden, &b.w2) + r(b.b2), label)
}
