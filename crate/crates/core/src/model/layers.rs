//! Forward and backward passes of the individual building blocks.
//!
//! Each forward function returns a trace holding the intermediates its backward
//! counterpart needs. Backward functions *accumulate* into the gradient buffers they
//! are handed.

use super::params::{AutoDisParams, BackboneParams, FusionParams, GateParams};
use super::ModelError;
use crate::linalg::{dot, norm, sigmoid, softmax_into};

/// Number of semantic resolutions fused per item.
pub const RESOLUTIONS: usize = 5;

/// Lower/upper clamp applied to the gate output so it stays strictly inside (0, 1).
pub const GATE_EPS: f64 = 1e-12;

const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct FusionTrace {
    pub scores: [f64; RESOLUTIONS],
    pub weights: [f64; RESOLUTIONS],
    /// `tanh(W^T e_i + b)` for each resolution, `RESOLUTIONS x hidden`.
    pub activations: Vec<f64>,
    pub fused: Vec<f64>,
}

/// Attention-weighted fusion of the five resolution embeddings.
pub fn fuse_resolutions(embeds: &[&[f64]], fusion: &FusionParams) -> Result<FusionTrace, ModelError> {
    if embeds.len() != RESOLUTIONS {
        return Err(ModelError::Shape(format!("expected {RESOLUTIONS} embeddings, got {}", embeds.len())));
    }
    let (dim, h) = (fusion.dim, fusion.hidden);
    if let Some(e) = embeds.iter().find(|e| e.len() != dim) {
        return Err(ModelError::Shape(format!("embedding of length {} for fusion dim {dim}", e.len())));
    }
    let mut activations = vec![0.0; RESOLUTIONS * h];
    let mut scores = [0.0; RESOLUTIONS];
    for (k, e) in embeds.iter().enumerate() {
        let act = &mut activations[k * h..(k + 1) * h];
        act.copy_from_slice(&fusion.bias);
        for (i, &x) in e.iter().enumerate() {
            let row = &fusion.proj[i * h..(i + 1) * h];
            for (a, w) in act.iter_mut().zip(row) {
                *a += x * w;
            }
        }
        act.iter_mut().for_each(|a| *a = a.tanh());
        scores[k] = dot(act, &fusion.score);
    }
    let mut weights = [0.0; RESOLUTIONS];
    softmax_into(&scores, &mut weights);
    let mut fused = vec![0.0; dim];
    for (w, e) in weights.iter().zip(embeds) {
        for (f, x) in fused.iter_mut().zip(e.iter()) {
            *f += w * x;
        }
    }
    Ok(FusionTrace { scores, weights, activations, fused })
}

/// Backward of [`fuse_resolutions`]. Adds parameter gradients to `grad` and the
/// gradient w.r.t. each input embedding to `d_embeds`.
pub fn fusion_backward(
    embeds: &[&[f64]],
    trace: &FusionTrace,
    fusion: &FusionParams,
    d_fused: &[f64],
    grad: &mut FusionParams,
    d_embeds: &mut [Vec<f64>],
) {
    let h = fusion.hidden;
    let d_alpha: [f64; RESOLUTIONS] = std::array::from_fn(|k| dot(embeds[k], d_fused));
    let mean = trace.weights.iter().zip(&d_alpha).map(|(a, d)| a * d).sum::<f64>();
    let mut dz = vec![0.0; h];
    for k in 0..RESOLUTIONS {
        let alpha = trace.weights[k];
        let d_score = alpha * (d_alpha[k] - mean);
        let act = &trace.activations[k * h..(k + 1) * h];
        let de = &mut d_embeds[k];
        for (d, g) in de.iter_mut().zip(d_fused) {
            *d += alpha * g;
        }
        if d_score == 0.0 {
            continue;
        }
        for j in 0..h {
            grad.score[j] += d_score * act[j];
            dz[j] = d_score * fusion.score[j] * (1.0 - act[j] * act[j]);
            grad.bias[j] += dz[j];
        }
        for (i, &x) in embeds[k].iter().enumerate() {
            let w = &fusion.proj[i * h..(i + 1) * h];
            let gw = &mut grad.proj[i * h..(i + 1) * h];
            let mut acc = 0.0;
            for j in 0..h {
                gw[j] += x * dz[j];
                acc += w[j] * dz[j];
            }
            de[i] += acc;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateTrace {
    pub input: Vec<f64>,
    pub pre_hidden: Vec<f64>,
    pub hidden: Vec<f64>,
    pub pre: f64,
    pub g: f64,
    /// The output hit the clamp; the gradient through it is zero.
    pub clamped: bool,
}

/// `g = sigmoid(w2 . relu(W1^T x + b1) + b2)`, clamped to `[GATE_EPS, 1 - GATE_EPS]`.
pub fn gate_forward(input: &[f64], gate: &GateParams) -> GateTrace {
    debug_assert_eq!(input.len(), gate.inputs);
    let m = gate.hidden;
    let mut pre_hidden = gate.b1.clone();
    for (i, &x) in input.iter().enumerate() {
        for (p, w) in pre_hidden.iter_mut().zip(&gate.w1[i * m..(i + 1) * m]) {
            *p += x * w;
        }
    }
    let hidden: Vec<f64> = pre_hidden.iter().map(|&p| p.max(0.0)).collect();
    let pre = dot(&hidden, &gate.w2) + gate.b2;
    let raw = sigmoid(pre);
    let g = raw.clamp(GATE_EPS, 1.0 - GATE_EPS);
    GateTrace { input: input.to_vec(), pre_hidden, hidden, pre, g, clamped: g != raw }
}

/// Backward of [`gate_forward`] given `d_g = dL/dg`.
pub fn gate_backward(trace: &GateTrace, gate: &GateParams, d_g: f64, grad: &mut GateParams) {
    if trace.clamped {
        return;
    }
    let d_pre = d_g * trace.g * (1.0 - trace.g);
    let m = gate.hidden;
    grad.b2 += d_pre;
    for j in 0..m {
        grad.w2[j] += d_pre * trace.hidden[j];
        if trace.pre_hidden[j] <= 0.0 {
            continue;
        }
        let dh = d_pre * gate.w2[j];
        grad.b1[j] += dh;
        for (i, &x) in trace.input.iter().enumerate() {
            grad.w1[i * m + j] += x * dh;
        }
    }
}

/// `g * e_hid + (1 - g) * e_sid`.
pub fn mix(e_hid: &[f64], e_sid: &[f64], g: f64) -> Vec<f64> {
    debug_assert_eq!(e_hid.len(), e_sid.len());
    e_hid.iter().zip(e_sid).map(|(h, s)| g * h + (1.0 - g) * s).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoDisTrace {
    pub x: f64,
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
    pub weights: Vec<f64>,
    pub out: Vec<f64>,
}

/// Maps a scalar onto a soft mixture of meta-embeddings.
pub fn autodis_embed(x: f64, p: &AutoDisParams) -> AutoDisTrace {
    let hb = p.buckets;
    let pre: Vec<f64> = p.w1.iter().zip(&p.b1).map(|(w, b)| w * x + b).collect();
    let hidden: Vec<f64> = pre.iter().map(|&a| if a > 0.0 { a } else { LEAKY_SLOPE * a }).collect();
    let logits: Vec<f64> = (0..hb).map(|k| dot(&p.w2[k * hb..(k + 1) * hb], &hidden) + p.skip * hidden[k]).collect();
    let tau = p.temperature();
    let scaled: Vec<f64> = logits.iter().map(|l| l / tau).collect();
    let mut weights = vec![0.0; hb];
    softmax_into(&scaled, &mut weights);
    let mut out = vec![0.0; p.dim];
    for (k, w) in weights.iter().enumerate() {
        for (o, m) in out.iter_mut().zip(&p.meta[k * p.dim..(k + 1) * p.dim]) {
            *o += w * m;
        }
    }
    AutoDisTrace { x, pre, hidden, logits, weights, out }
}

/// Backward of [`autodis_embed`]; returns `dL/dx`.
pub fn autodis_backward(trace: &AutoDisTrace, p: &AutoDisParams, d_out: &[f64], grad: &mut AutoDisParams) -> f64 {
    let (hb, e) = (p.buckets, p.dim);
    let d_w: Vec<f64> = (0..hb).map(|k| dot(&p.meta[k * e..(k + 1) * e], d_out)).collect();
    for (k, &w) in trace.weights.iter().enumerate() {
        for (g, d) in grad.meta[k * e..(k + 1) * e].iter_mut().zip(d_out) {
            *g += w * d;
        }
    }
    let mean = trace.weights.iter().zip(&d_w).map(|(w, d)| w * d).sum::<f64>();
    let tau = p.temperature();
    let d_logit: Vec<f64> = trace.weights.iter().zip(&d_w).map(|(w, d)| w * (d - mean) / tau).collect();
    let mut d_hidden: Vec<f64> = d_logit.iter().map(|d| p.skip * d).collect();
    for k in 0..hb {
        let dl = d_logit[k];
        grad.skip += dl * trace.hidden[k];
        for h in 0..hb {
            grad.w2[k * hb + h] += dl * trace.hidden[h];
            d_hidden[h] += dl * p.w2[k * hb + h];
        }
    }
    let mut dx = 0.0;
    for h in 0..hb {
        let slope = if trace.pre[h] > 0.0 { 1.0 } else { LEAKY_SLOPE };
        let d_pre = d_hidden[h] * slope;
        grad.w1[h] += d_pre * trace.x;
        grad.b1[h] += d_pre;
        dx += d_pre * p.w1[h];
    }
    dx
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignTrace {
    /// Cosine similarity between the target and each history item.
    pub sims: Vec<f64>,
    pub autodis: Vec<AutoDisTrace>,
    /// History position supplying each max-pooled coordinate.
    pub argmax: Vec<usize>,
    /// `[max-pool | mean-pool]`, length `2 * autodis.dim`.
    pub features: Vec<f64>,
}

/// Alignment features between a target SID embedding and the history SID embeddings.
///
/// Similarities involving a zero-norm vector are 0. An empty history yields the
/// learned `no_history` vector.
pub fn align(target: &[f64], history: &[&[f64]], p: &AutoDisParams) -> AlignTrace {
    if history.is_empty() {
        return AlignTrace { sims: vec![], autodis: vec![], argmax: vec![], features: p.no_history.clone() };
    }
    let e = p.dim;
    let sims: Vec<f64> = history.iter().map(|h| crate::linalg::cosine(target, h)).collect();
    let autodis: Vec<AutoDisTrace> = sims.iter().map(|&s| autodis_embed(s, p)).collect();
    let mut features = vec![0.0; 2 * e];
    let mut argmax = vec![0usize; e];
    for j in 0..e {
        let mut best = autodis[0].out[j];
        let mut total = 0.0;
        for (t, a) in autodis.iter().enumerate() {
            if a.out[j] > best {
                best = a.out[j];
                argmax[j] = t;
            }
            total += a.out[j];
        }
        features[j] = best;
        features[e + j] = total / autodis.len() as f64;
    }
    AlignTrace { sims, autodis, argmax, features }
}

/// Backward of [`align`]. Adds into `d_target` and `d_history[t]`.
pub fn align_backward(
    target: &[f64],
    history: &[&[f64]],
    trace: &AlignTrace,
    p: &AutoDisParams,
    d_features: &[f64],
    grad: &mut AutoDisParams,
    d_target: &mut [f64],
    d_history: &mut [Vec<f64>],
) {
    if history.is_empty() {
        for (g, d) in grad.no_history.iter_mut().zip(d_features) {
            *g += d;
        }
        return;
    }
    let e = p.dim;
    let t_len = history.len() as f64;
    let na = norm(target);
    for (t, (hist, ad)) in history.iter().zip(&trace.autodis).enumerate() {
        let d_out: Vec<f64> = (0..e)
            .map(|j| {
                let from_max = if trace.argmax[j] == t { d_features[j] } else { 0.0 };
                from_max + d_features[e + j] / t_len
            })
            .collect();
        let d_sim = autodis_backward(ad, p, &d_out, grad);
        let nb = norm(hist);
        if na == 0.0 || nb == 0.0 || d_sim == 0.0 {
            continue;
        }
        let s = trace.sims[t];
        let inv = 1.0 / (na * nb);
        for (i, (&a, &b)) in target.iter().zip(hist.iter()).enumerate() {
            d_target[i] += d_sim * (b * inv - s * a / (na * na));
            d_history[t][i] += d_sim * (a * inv - s * b / (nb * nb));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneTrace {
    pub input: Vec<f64>,
    pub pre_hidden: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logit: f64,
}

pub fn backbone_forward(input: Vec<f64>, p: &BackboneParams) -> BackboneTrace {
    let h = p.hidden;
    let mut pre_hidden = p.b1.clone();
    for (i, &x) in input.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (a, w) in pre_hidden.iter_mut().zip(&p.w1[i * h..(i + 1) * h]) {
            *a += x * w;
        }
    }
    let hidden: Vec<f64> = pre_hidden.iter().map(|&a| a.max(0.0)).collect();
    let logit = dot(&hidden, &p.w2) + p.b2;
    BackboneTrace { input, pre_hidden, hidden, logit }
}

/// Backward of [`backbone_forward`]; returns `dL/dinput`.
pub fn backbone_backward(trace: &BackboneTrace, p: &BackboneParams, d_logit: f64, grad: &mut BackboneParams) -> Vec<f64> {
    let h = p.hidden;
    grad.b2 += d_logit;
    let mut d_pre = vec![0.0; h];
    for j in 0..h {
        grad.w2[j] += d_logit * trace.hidden[j];
        if trace.pre_hidden[j] > 0.0 {
            d_pre[j] = d_logit * p.w2[j];
            grad.b1[j] += d_pre[j];
        }
    }
    trace
        .input
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let gw = &mut grad.w1[i * h..(i + 1) * h];
            let w = &p.w1[i * h..(i + 1) * h];
            let mut acc = 0.0;
            for j in 0..h {
                gw[j] += x * d_pre[j];
                acc += w[j] * d_pre[j];
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::GATE_FEATURES;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-scale..scale)).collect()
    }

    fn random_fusion(rng: &mut ChaCha8Rng, dim: usize, h: usize) -> FusionParams {
        FusionParams {
            dim,
            hidden: h,
            proj: random_vec(rng, dim * h, 1.0),
            bias: random_vec(rng, h, 1.0),
            score: random_vec(rng, h, 1.0),
        }
    }

    fn random_autodis(rng: &mut ChaCha8Rng, hb: usize, e: usize, tau: f64) -> AutoDisParams {
        let mut p = AutoDisParams::zeros(hb, e, tau).unwrap();
        p.w1 = random_vec(rng, hb, 2.0);
        p.b1 = random_vec(rng, hb, 1.0);
        p.w2 = random_vec(rng, hb * hb, 1.0);
        p.skip = rng.random_range(0.0..2.0);
        p.meta = random_vec(rng, hb * e, 1.0);
        p.no_history = random_vec(rng, 2 * e, 1.0);
        p
    }

    #[test]
    fn identical_embeddings_fuse_to_themselves() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_fusion(&mut rng, 4, 3);
        let v = vec![0.5, -1.0, 2.0, 0.0];
        let refs: Vec<&[f64]> = vec![&v; 5];
        let t = fuse_resolutions(&refs, &f).unwrap();
        for (a, b) in t.fused.iter().zip(&v) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_projection_gives_uniform_weights() {
        let f = FusionParams { score: vec![1.0, -2.0], ..FusionParams::zeros(3, 2) };
        let rows: Vec<Vec<f64>> = (0..5).map(|k| vec![k as f64, 1.0, -(k as f64)]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let t = fuse_resolutions(&refs, &f).unwrap();
        assert!(t.weights.iter().all(|&w| w == 0.2));
        for (a, b) in t.fused.iter().zip([2.0, 1.0, -2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fusion_weights_match_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_fusion(&mut rng, 6, 4);
        let rows: Vec<Vec<f64>> = (0..5).map(|_| random_vec(&mut rng, 6, 1.0)).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let t = fuse_resolutions(&refs, &f).unwrap();
        // straight-line recomputation
        let mut scores = [0.0f64; 5];
        for k in 0..5 {
            let mut s = 0.0;
            for j in 0..4 {
                let mut z = f.bias[j];
                for i in 0..6 {
                    z += rows[k][i] * f.proj[i * 4 + j];
                }
                s += f.score[j] * z.tanh();
            }
            scores[k] = s;
        }
        let total: f64 = scores.iter().map(|s| s.exp()).sum();
        for k in 0..5 {
            assert!((t.weights[k] - scores[k].exp() / total).abs() < 1e-12);
        }
    }

    #[test]
    fn fusion_rejects_bad_shapes() {
        let f = FusionParams::zeros(3, 2);
        let v = [0.0; 3];
        assert!(fuse_resolutions(&[&v[..]; 4], &f).is_err());
        let w = [0.0; 2];
        assert!(fuse_resolutions(&[&v[..], &v, &v, &v, &w], &f).is_err());
    }

    #[test]
    fn zero_gate_is_one_half() {
        let t = gate_forward(&[1.0, 2.0, 3.0, 4.0, 5.0], &GateParams::zeros(GATE_FEATURES, 8));
        assert_eq!(t.g, 0.5);
    }

    #[test]
    fn gate_saturates() {
        let mut p = GateParams::zeros(GATE_FEATURES, 1);
        p.b2 = 20.0;
        assert!(gate_forward(&[0.0; 5], &p).g > 0.999);
        p.b2 = 800.0;
        let t = gate_forward(&[0.0; 5], &p);
        assert!(t.g < 1.0 && t.clamped);
    }

    #[test]
    fn gate_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = GateParams {
            inputs: 5,
            hidden: 8,
            w1: random_vec(&mut rng, 40, 1.0),
            b1: random_vec(&mut rng, 8, 1.0),
            w2: random_vec(&mut rng, 8, 1.0),
            b2: 0.3,
        };
        let x = random_vec(&mut rng, 5, 2.0);
        let mut pre = p.b2;
        for j in 0..8 {
            let mut a = p.b1[j];
            for i in 0..5 {
                a += x[i] * p.w1[i * 8 + j];
            }
            pre += p.w2[j] * a.max(0.0);
        }
        let want = 1.0 / (1.0 + (-pre).exp());
        assert!((gate_forward(&x, &p).g - want).abs() < 1e-12);
    }

    #[test]
    fn mix_endpoints() {
        let h = [1.0, -2.0, 3.5];
        let s = [0.25, 4.0, -1.0];
        assert_eq!(mix(&h, &s, 1.0), h.to_vec());
        assert_eq!(mix(&h, &s, 0.0), s.to_vec());
        assert_eq!(mix(&h, &h, 0.37), h.to_vec());
    }

    #[test]
    fn single_bucket_autodis_returns_its_meta_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_autodis(&mut rng, 1, 3, 1.0);
        for x in [-1.0, 0.0, 0.3, 1.0] {
            assert_eq!(autodis_embed(x, &p).out, p.meta);
        }
    }

    #[test]
    fn cold_temperature_approaches_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_autodis(&mut rng, 16, 8, 1e-3);
        for _ in 0..20 {
            let x = rng.random_range(-1.0..1.0);
            let t = autodis_embed(x, &p);
            let best = (0..16).max_by(|&a, &b| t.logits[a].total_cmp(&t.logits[b])).unwrap();
            let want = &p.meta[best * 8..(best + 1) * 8];
            for (o, w) in t.out.iter().zip(want) {
                assert!((o - w).abs() < 1e-3, "x={x}");
            }
        }
    }

    #[test]
    fn temperature_must_be_positive() {
        assert!(AutoDisParams::zeros(4, 2, 0.0).is_err());
        assert!(AutoDisParams::zeros(4, 2, -1.0).is_err());
    }

    #[test]
    fn self_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_autodis(&mut rng, 4, 3, 1.0);
        let v = random_vec(&mut rng, 5, 1.0);
        let t = align(&v, &[&v], &p);
        assert!((t.sims[0] - 1.0).abs() < 1e-12);
        let one = autodis_embed(t.sims[0], &p).out;
        assert_eq!(t.features, [one.clone(), one].concat());
    }

    #[test]
    fn orthogonal_history_has_zero_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_autodis(&mut rng, 4, 3, 1.0);
        let t = align(&[1.0, 0.0, 0.0], &[&[0.0, 2.0, 0.0], &[0.0, 0.0, -1.0], &[0.0, 0.0, 0.0]], &p);
        assert_eq!(t.sims, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_history_uses_learned_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_autodis(&mut rng, 4, 3, 1.0);
        assert_eq!(align(&[1.0, 2.0, 3.0], &[], &p).features, p.no_history);
    }

    #[test]
    fn similarities_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_autodis(&mut rng, 4, 3, 1.0);
        let a = random_vec(&mut rng, 6, 1.0);
        let hist: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 6, 1.0)).collect();
        let refs: Vec<&[f64]> = hist.iter().map(Vec::as_slice).collect();
        let t = align(&a, &refs, &p);
        for (h, s) in hist.iter().zip(&t.sims) {
            let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
            for i in 0..6 {
                ab += a[i] * h[i];
                aa += a[i] * a[i];
                bb += h[i] * h[i];
            }
            assert!((s - ab / (aa.sqrt() * bb.sqrt())).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn fusion_weights_on_simplex(seed in any::<u64>(), scale in 0.01f64..20.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_fusion(&mut rng, 8, 5);
            let rows: Vec<Vec<f64>> = (0..5).map(|_| random_vec(&mut rng, 8, scale)).collect();
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            let t = fuse_resolutions(&refs, &f).unwrap();
            prop_assert!(t.weights.iter().all(|&w| w >= 0.0));
            prop_assert!((t.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn gate_stays_inside_unit_interval(seed in any::<u64>(), scale in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = GateParams {
                inputs: 5,
                hidden: 8,
                w1: random_vec(&mut rng, 40, scale),
                b1: random_vec(&mut rng, 8, scale),
                w2: random_vec(&mut rng, 8, scale),
                b2: rng.random_range(-scale..scale),
            };
            let g = gate_forward(&random_vec(&mut rng, 5, scale), &p).g;
            prop_assert!(g > 0.0 && g < 1.0);
        }

        #[test]
        fn mix_stays_between_inputs(seed in any::<u64>(), g in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_vec(&mut rng, 8, 5.0);
            let s = random_vec(&mut rng, 8, 5.0);
            for ((m, a), b) in mix(&h, &s, g).iter().zip(&h).zip(&s) {
                prop_assert!(*m >= a.min(*b) - 1e-12 && *m <= a.max(*b) + 1e-12);
            }
        }

        #[test]
        fn autodis_weights_sum_to_one(seed in any::<u64>(), x in -1.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_autodis(&mut rng, 16, 8, 1.0);
            let t = autodis_embed(x, &p);
            prop_assert!((t.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn cosine_in_range(seed in any::<u64>(), scale in 1e-6f64..1e6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_autodis(&mut rng, 2, 2, 1.0);
            let a = random_vec(&mut rng, 16, scale);
            let hist: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 16, scale)).collect();
            let refs: Vec<&[f64]> = hist.iter().map(Vec::as_slice).collect();
            for s in align(&a, &refs, &p).sims {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s));
            }
        }
    }
}
