//! Mini-batch training with Adam.
//!
//! Dense parameters use standard Adam. Embedding tables use the lazy variant: a row's
//! moments and value are only updated in steps where the row received a gradient, with
//! bias correction from the global step count. Rows never seen in training therefore
//! keep their initial values.
//!
//! Per step, for every parameter `w` with mini-batch mean gradient `g`:
//!
//! ```text
//! m = b1 * m + (1 - b1) * g
//! v = b2 * v + (1 - b2) * g^2
//! w -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
//! ```
//!
//! Examples are visited in a fresh permutation each epoch, drawn from the `shuffle`
//! stream indexed by the epoch number, so training resumed from a checkpoint follows
//! the same trajectory as an uninterrupted run.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{Gradients, ResolvedExample};
use super::params::{ModelParams, ParamGroup};
use super::ModelError;
use crate::embedding::{EmbeddingTable, RowGrads};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Total number of epochs; a resumed run continues up to this count.
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 2, lr: 0.005, batch_size: 64, seed: 42, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.batch_size == 0 {
            return Err(ModelError::InvalidConfig { field: "batch_size", reason: "must be at least 1".into() });
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(ModelError::InvalidConfig { field: "lr", reason: "must be finite and non-negative".into() });
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(ModelError::InvalidConfig { field: "beta1/beta2", reason: "must be in [0, 1)".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn zeros(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n] }
    }
}

/// Optimizer state plus training progress; stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub step: u64,
    pub epochs_done: usize,
    /// Mean training loss of each completed epoch.
    pub loss_curve: Vec<f64>,
    dense: Vec<Moments>,
    hid: Moments,
    sid: Moments,
    user: Moments,
}

impl TrainerState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            step: 0,
            epochs_done: 0,
            loss_curve: Vec::new(),
            dense: params.dense.tensors().iter().map(|(_, _, t)| Moments::zeros(t.len())).collect(),
            hid: Moments::zeros(params.hid.table.weights().len()),
            sid: Moments::zeros(params.sid.table.weights().len()),
            user: Moments::zeros(params.user.weights().len()),
        }
    }

    fn matches(&self, params: &ModelParams) -> bool {
        let dense = params.dense.tensors();
        self.dense.len() == dense.len()
            && self.dense.iter().zip(&dense).all(|(m, (_, _, t))| m.m.len() == t.len())
            && self.hid.m.len() == params.hid.table.weights().len()
            && self.sid.m.len() == params.sid.table.weights().len()
            && self.user.m.len() == params.user.weights().len()
    }
}

struct Adam<'a> {
    cfg: &'a TrainConfig,
    lr_t: f64,
    bc2: f64,
}

impl Adam<'_> {
    #[inline]
    fn update(&self, w: &mut f64, g: f64, m: &mut f64, v: &mut f64) {
        *m = self.cfg.beta1 * *m + (1.0 - self.cfg.beta1) * g;
        *v = self.cfg.beta2 * *v + (1.0 - self.cfg.beta2) * g * g;
        *w -= self.lr_t * *m / ((*v / self.bc2).sqrt() + self.cfg.eps);
    }

    fn rows(&self, table: &mut EmbeddingTable, grads: &RowGrads, mom: &mut Moments) {
        let dim = table.dim();
        let weights = table.weights_mut();
        for (row, g) in grads.iter() {
            let span = row * dim..(row + 1) * dim;
            for (((w, &gi), m), v) in
                weights[span.clone()].iter_mut().zip(g).zip(&mut mom.m[span.clone()]).zip(&mut mom.v[span])
            {
                self.update(w, gi, m, v);
            }
        }
    }
}

fn apply_adam(params: &mut ModelParams, grads: &Gradients, state: &mut TrainerState, cfg: &TrainConfig) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let adam = Adam { cfg, lr_t: cfg.lr / bc1, bc2: 1.0 - cfg.beta2.powi(t) };
    for (((_, _, w), (_, _, g)), mom) in
        params.dense.tensors_mut().into_iter().zip(grads.dense.tensors()).zip(&mut state.dense)
    {
        for (((wi, &gi), m), v) in w.iter_mut().zip(g).zip(&mut mom.m).zip(&mut mom.v) {
            adam.update(wi, gi, m, v);
        }
    }
    adam.rows(&mut params.hid.table, &grads.hid, &mut state.hid);
    adam.rows(&mut params.sid.table, &grads.sid, &mut state.sid);
    adam.rows(&mut params.user, &grads.user, &mut state.user);
}

/// Trains `params` on `examples` from `state.epochs_done` up to `cfg.epochs`.
///
/// Each batch's gradient is the mean of the per-example gradients; the recorded epoch
/// loss is the mean per-example loss seen during the epoch (before each batch's
/// update).
pub fn train(
    params: &mut ModelParams,
    examples: &[ResolvedExample],
    cfg: &TrainConfig,
    state: &mut TrainerState,
) -> Result<(), ModelError> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if !state.matches(params) {
        return Err(ModelError::Shape("trainer state does not match the parameters".into()));
    }
    let mut grads = Gradients::zeros_like(params);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in state.epochs_done..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(cfg.seed, "shuffle", epoch as u64));
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.clear();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let ex = &examples[i];
                let trace = params.forward(ex);
                if !trace.loss.is_finite() {
                    return Err(ModelError::Diverged { epoch, batch: b, loss: trace.loss });
                }
                total += trace.loss;
                params.accumulate_gradients(ex, &trace, scale, &mut grads);
            }
            apply_adam(params, &grads, state, cfg);
        }
        let mean = total / examples.len() as f64;
        if !mean.is_finite() {
            return Err(ModelError::Diverged { epoch, batch: 0, loss: mean });
        }
        state.loss_curve.push(mean);
        state.epochs_done = epoch + 1;
    }
    if !params.is_finite() {
        return Err(ModelError::Diverged { epoch: state.epochs_done, batch: 0, loss: f64::NAN });
    }
    Ok(())
}

/// Mean loss over `examples` without updating anything.
pub fn mean_loss(params: &ModelParams, examples: &[ResolvedExample]) -> f64 {
    examples.iter().map(|e| params.loss(e)).sum::<f64>() / examples.len().max(1) as f64
}

/// Names used in reports, matching [`ParamGroup::name`].
pub fn group_names() -> Vec<&'static str> {
    ParamGroup::ALL.iter().map(|g| g.name()).collect()
}
