use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::data::{Item, ItemCounts, ItemStats};
use crate::embedding::{EmbeddingTable, HidTable, SidTable, SidVocab};
use crate::rng;

/// Number of item statistics fed to the gate.
pub const GATE_FEATURES: usize = 5;

/// Layer sizes. HID and SID embeddings share `embed_dim` so they can be mixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub user_dim: usize,
    pub fusion_hidden: usize,
    pub gate_hidden: usize,
    pub autodis_buckets: usize,
    pub autodis_dim: usize,
    pub autodis_temperature: f64,
    pub backbone_hidden: usize,
    pub hid_buckets: usize,
    /// Users `0..num_users` get their own row; any other key maps to one OOV row.
    pub num_users: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 16,
            user_dim: 16,
            fusion_hidden: 16,
            gate_hidden: 8,
            autodis_buckets: 16,
            autodis_dim: 8,
            autodis_temperature: 1.0,
            backbone_hidden: 32,
            hid_buckets: 512,
            num_users: 500,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, v) in [
            ("embed_dim", self.embed_dim),
            ("user_dim", self.user_dim),
            ("fusion_hidden", self.fusion_hidden),
            ("gate_hidden", self.gate_hidden),
            ("autodis_buckets", self.autodis_buckets),
            ("autodis_dim", self.autodis_dim),
            ("backbone_hidden", self.backbone_hidden),
            ("hid_buckets", self.hid_buckets),
        ] {
            if v == 0 {
                return Err(ModelError::InvalidConfig { field, reason: "must be at least 1".into() });
            }
        }
        if !(self.autodis_temperature > 0.0 && self.autodis_temperature.is_finite()) {
            return Err(ModelError::InvalidConfig {
                field: "autodis_temperature",
                reason: format!("must be positive, got {}", self.autodis_temperature),
            });
        }
        Ok(())
    }

    pub fn backbone_input(&self) -> usize {
        self.embed_dim + self.user_dim + 2 * self.autodis_dim
    }
}

/// Which parts of the network are active.
///
/// `hid_only` is the baseline without any semantic-ID path: the target is represented
/// by its HID embedding alone and the alignment features are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    pub use_multires: bool,
    pub use_gate: bool,
    pub use_alignment: bool,
    #[serde(default)]
    pub hid_only: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self { use_multires: true, use_gate: true, use_alignment: true, hid_only: false }
    }
}

impl AblationFlags {
    pub fn uses_sid(&self) -> bool {
        !self.hid_only
    }

    pub fn gate_active(&self) -> bool {
        self.use_gate && !self.hid_only
    }

    pub fn alignment_active(&self) -> bool {
        self.use_alignment && !self.hid_only
    }
}

/// Additive attention over the five resolutions: `score_i = w . tanh(W^T e_i + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub dim: usize,
    pub hidden: usize,
    /// `dim x hidden`, row-major.
    pub proj: Vec<f64>,
    pub bias: Vec<f64>,
    pub score: Vec<f64>,
}

impl FusionParams {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self { dim, hidden, proj: vec![0.0; dim * hidden], bias: vec![0.0; hidden], score: vec![0.0; hidden] }
    }

    fn init<R: Rng + ?Sized>(dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(dim, hidden);
        fill_glorot(&mut p.proj, dim, hidden, rng);
        fill_glorot(&mut p.score, hidden, 1, rng);
        p
    }
}

/// Two-layer perceptron (ReLU hidden layer) over the normalized item statistics,
/// squashed by a sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub inputs: usize,
    pub hidden: usize,
    /// `inputs x hidden`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl GateParams {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Self { inputs, hidden, w1: vec![0.0; inputs * hidden], b1: vec![0.0; hidden], w2: vec![0.0; hidden], b2: 0.0 }
    }

    /// Glorot hidden layer; the output layer starts at zero, so every item begins at `g = 0.5`.
    fn init<R: Rng + ?Sized>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(inputs, hidden);
        fill_glorot(&mut p.w1, inputs, hidden, rng);
        p
    }
}

/// Soft discretization of a scalar into a mixture of `buckets` meta-embeddings.
///
/// `h = leaky_relu(w1 * x + b1)`, `logits = W2 h + skip * h`,
/// `p = softmax(logits / temperature)`, `out = sum_k p_k meta_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoDisParams {
    pub buckets: usize,
    pub dim: usize,
    temperature: f64,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `buckets x buckets`, row `k` produces logit `k`.
    pub w2: Vec<f64>,
    pub skip: f64,
    /// `buckets x dim`, row-major.
    pub meta: Vec<f64>,
    /// Alignment features used when the history is empty (length `2 * dim`).
    pub no_history: Vec<f64>,
}

impl AutoDisParams {
    pub fn zeros(buckets: usize, dim: usize, temperature: f64) -> Result<Self, ModelError> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(ModelError::InvalidConfig {
                field: "autodis_temperature",
                reason: format!("must be positive, got {temperature}"),
            });
        }
        Ok(Self {
            buckets,
            dim,
            temperature,
            w1: vec![0.0; buckets],
            b1: vec![0.0; buckets],
            w2: vec![0.0; buckets * buckets],
            skip: 0.0,
            meta: vec![0.0; buckets * dim],
            no_history: vec![0.0; 2 * dim],
        })
    }

    fn init<R: Rng + ?Sized>(buckets: usize, dim: usize, temperature: f64, rng: &mut R) -> Result<Self, ModelError> {
        let mut p = Self::zeros(buckets, dim, temperature)?;
        p.w1.iter_mut().for_each(|w| *w = rng.random_range(-2.0..=2.0));
        p.b1.iter_mut().for_each(|w| *w = rng.random_range(-1.0..=1.0));
        fill_glorot(&mut p.w2, buckets, buckets, rng);
        p.skip = 1.0;
        let bound = 1.0 / (dim as f64).sqrt();
        p.meta.iter_mut().for_each(|w| *w = rng.random_range(-bound..=bound));
        Ok(p)
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
}

/// The ranking head: ReLU hidden layer over `[e_shid | e_user | alignment]`, then a
/// single logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneParams {
    pub input: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl BackboneParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self { input, hidden, w1: vec![0.0; input * hidden], b1: vec![0.0; hidden], w2: vec![0.0; hidden], b2: 0.0 }
    }

    fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, hidden);
        fill_glorot(&mut p.w1, input, hidden, rng);
        fill_glorot(&mut p.w2, hidden, 1, rng);
        p
    }
}

fn fill_glorot<R: Rng + ?Sized>(w: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut R) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    w.iter_mut().for_each(|x| *x = rng.random_range(-bound..=bound));
}

/// `log1p` of the raw counters followed by per-feature standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateNormalizer {
    pub mean: [f64; GATE_FEATURES],
    pub std: [f64; GATE_FEATURES],
}

impl Default for GateNormalizer {
    fn default() -> Self {
        Self { mean: [0.0; GATE_FEATURES], std: [1.0; GATE_FEATURES] }
    }
}

impl GateNormalizer {
    /// Mean and population standard deviation of `log1p(count)` over `counts`. A
    /// feature with (near) zero spread is left unscaled.
    pub fn fit<'a>(counts: impl IntoIterator<Item = &'a ItemCounts>) -> Self {
        let logs: Vec<[f64; GATE_FEATURES]> = counts.into_iter().map(log_counts).collect();
        if logs.is_empty() {
            return Self::default();
        }
        let n = logs.len() as f64;
        let mut out = Self::default();
        for f in 0..GATE_FEATURES {
            let mean = logs.iter().map(|l| l[f]).sum::<f64>() / n;
            let var = logs.iter().map(|l| (l[f] - mean).powi(2)).sum::<f64>() / n;
            out.mean[f] = mean;
            out.std[f] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
        out
    }

    /// Fits on the statistics of every catalog item (unseen items count as zeros).
    pub fn fit_catalog(catalog: &[Item], stats: &ItemStats) -> Self {
        let counts: Vec<ItemCounts> = catalog.iter().map(|it| stats.get(it.item_key)).collect();
        Self::fit(&counts)
    }

    pub fn normalize(&self, counts: &ItemCounts) -> [f64; GATE_FEATURES] {
        let l = log_counts(counts);
        std::array::from_fn(|f| (l[f] - self.mean[f]) / self.std[f])
    }
}

fn log_counts(c: &ItemCounts) -> [f64; GATE_FEATURES] {
    c.as_array().map(|x| (x as f64).ln_1p())
}

/// Raw counters of one item together with their normalized gate input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateFeatures {
    pub counts: ItemCounts,
    pub normalized: [f64; GATE_FEATURES],
}

impl GateFeatures {
    pub fn new(counts: ItemCounts, normalizer: &GateNormalizer) -> Self {
        Self { counts, normalized: normalizer.normalize(&counts) }
    }
}

/// Named parameter groups, used for gradient-check reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Fusion,
    Gate,
    AutoDis,
    Backbone,
    HidTable,
    SidTable,
    UserTable,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 7] = [
        Self::Fusion,
        Self::Gate,
        Self::AutoDis,
        Self::Backbone,
        Self::HidTable,
        Self::SidTable,
        Self::UserTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fusion => "fusion",
            Self::Gate => "gate",
            Self::AutoDis => "autodis",
            Self::Backbone => "backbone",
            Self::HidTable => "hid_table",
            Self::SidTable => "sid_table",
            Self::UserTable => "user_table",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == name)
    }
}

/// The dense (non-table) parameter groups, shared between parameters and gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub fusion: FusionParams,
    pub gate: GateParams,
    pub autodis: AutoDisParams,
    pub backbone: BackboneParams,
}

impl DenseParams {
    pub fn zeros(config: &ModelConfig) -> Result<Self, ModelError> {
        Ok(Self {
            fusion: FusionParams::zeros(config.embed_dim, config.fusion_hidden),
            gate: GateParams::zeros(GATE_FEATURES, config.gate_hidden),
            autodis: AutoDisParams::zeros(config.autodis_buckets, config.autodis_dim, config.autodis_temperature)?,
            backbone: BackboneParams::zeros(config.backbone_input(), config.backbone_hidden),
        })
    }

    /// Every tensor in a fixed order, as `(group, name, values)`.
    pub fn tensors(&self) -> Vec<(ParamGroup, &'static str, &[f64])> {
        use ParamGroup::*;
        vec![
            (Fusion, "proj", &self.fusion.proj),
            (Fusion, "bias", &self.fusion.bias),
            (Fusion, "score", &self.fusion.score),
            (Gate, "w1", &self.gate.w1),
            (Gate, "b1", &self.gate.b1),
            (Gate, "w2", &self.gate.w2),
            (Gate, "b2", std::slice::from_ref(&self.gate.b2)),
            (AutoDis, "w1", &self.autodis.w1),
            (AutoDis, "b1", &self.autodis.b1),
            (AutoDis, "w2", &self.autodis.w2),
            (AutoDis, "skip", std::slice::from_ref(&self.autodis.skip)),
            (AutoDis, "meta", &self.autodis.meta),
            (AutoDis, "no_history", &self.autodis.no_history),
            (Backbone, "w1", &self.backbone.w1),
            (Backbone, "b1", &self.backbone.b1),
            (Backbone, "w2", &self.backbone.w2),
            (Backbone, "b2", std::slice::from_ref(&self.backbone.b2)),
        ]
    }

    /// Same order as [`DenseParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(ParamGroup, &'static str, &mut [f64])> {
        use ParamGroup::*;
        vec![
            (Fusion, "proj", &mut self.fusion.proj),
            (Fusion, "bias", &mut self.fusion.bias),
            (Fusion, "score", &mut self.fusion.score),
            (Gate, "w1", &mut self.gate.w1),
            (Gate, "b1", &mut self.gate.b1),
            (Gate, "w2", &mut self.gate.w2),
            (Gate, "b2", std::slice::from_mut(&mut self.gate.b2)),
            (AutoDis, "w1", &mut self.autodis.w1),
            (AutoDis, "b1", &mut self.autodis.b1),
            (AutoDis, "w2", &mut self.autodis.w2),
            (AutoDis, "skip", std::slice::from_mut(&mut self.autodis.skip)),
            (AutoDis, "meta", &mut self.autodis.meta),
            (AutoDis, "no_history", &mut self.autodis.no_history),
            (Backbone, "w1", &mut self.backbone.w1),
            (Backbone, "b1", &mut self.backbone.b1),
            (Backbone, "w2", &mut self.backbone.w2),
            (Backbone, "b2", std::slice::from_mut(&mut self.backbone.b2)),
        ]
    }
}

/// All trainable tensors plus what is needed to map raw examples onto them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub flags: AblationFlags,
    pub seed: u64,
    pub normalizer: GateNormalizer,
    pub hid: HidTable,
    pub sid: SidTable,
    pub user: EmbeddingTable,
    pub dense: DenseParams,
}

impl ModelParams {
    /// Randomly initialized parameters. Tables are uniform in `+-1/sqrt(dim)`, dense
    /// weights Glorot-uniform, biases zero.
    pub fn init(
        config: ModelConfig,
        flags: AblationFlags,
        vocab: SidVocab,
        normalizer: GateNormalizer,
        seed: u64,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = rng::stream(seed, "model-init", 0);
        let hid = HidTable { table: EmbeddingTable::uniform(config.hid_buckets, config.embed_dim, &mut rng)? };
        let sid_rows = vocab.size();
        let sid = SidTable::new(vocab, EmbeddingTable::uniform(sid_rows, config.embed_dim, &mut rng)?)?;
        let user = EmbeddingTable::uniform(config.num_users + 1, config.user_dim, &mut rng)?;
        let dense = DenseParams {
            fusion: FusionParams::init(config.embed_dim, config.fusion_hidden, &mut rng),
            gate: GateParams::init(GATE_FEATURES, config.gate_hidden, &mut rng),
            autodis: AutoDisParams::init(config.autodis_buckets, config.autodis_dim, config.autodis_temperature, &mut rng)?,
            backbone: BackboneParams::init(config.backbone_input(), config.backbone_hidden, &mut rng),
        };
        Ok(Self { config, flags, seed, normalizer, hid, sid, user, dense })
    }

    /// Every trainable value set to zero.
    pub fn zeros(config: ModelConfig, flags: AblationFlags, vocab: SidVocab, normalizer: GateNormalizer) -> Result<Self, ModelError> {
        config.validate()?;
        let sid_rows = vocab.size();
        Ok(Self {
            hid: HidTable { table: EmbeddingTable::zeros(config.hid_buckets, config.embed_dim)? },
            sid: SidTable::new(vocab, EmbeddingTable::zeros(sid_rows, config.embed_dim)?)?,
            user: EmbeddingTable::zeros(config.num_users + 1, config.user_dim)?,
            dense: DenseParams::zeros(&config)?,
            config,
            flags,
            seed: 0,
            normalizer,
        })
    }

    pub fn user_row(&self, key: crate::data::UserKey) -> usize {
        usize::try_from(key.0).ok().filter(|&k| k < self.config.num_users).unwrap_or(self.config.num_users)
    }

    pub fn table(&self, group: ParamGroup) -> Option<&EmbeddingTable> {
        match group {
            ParamGroup::HidTable => Some(&self.hid.table),
            ParamGroup::SidTable => Some(&self.sid.table),
            ParamGroup::UserTable => Some(&self.user),
            _ => None,
        }
    }

    pub fn table_mut(&mut self, group: ParamGroup) -> Option<&mut EmbeddingTable> {
        match group {
            ParamGroup::HidTable => Some(&mut self.hid.table),
            ParamGroup::SidTable => Some(&mut self.sid.table),
            ParamGroup::UserTable => Some(&mut self.user),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.dense.tensors().iter().all(|(_, _, t)| t.iter().all(|x| x.is_finite()))
            && [&self.hid.table, &self.sid.table, &self.user].iter().all(|t| t.weights().iter().all(|x| x.is_finite()))
    }
}
