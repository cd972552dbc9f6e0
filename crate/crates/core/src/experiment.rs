//! End-to-end runs: quantize a catalog, build and train a model variant, evaluate it.

use serde::{Deserialize, Serialize};

use crate::data::{Example, Item, ItemStats};
use crate::embedding::SidVocab;
use crate::eval::{evaluate, EvalReport};
use crate::linalg::Matrix;
use crate::model::{
    train, AblationFlags, FeatureIndex, GateNormalizer, ModelConfig, ModelError, ModelParams, TrainConfig, TrainerState,
};
use crate::quantizer::{self, CodebookStack, KMeansConfig, QuantizerError};
use crate::sid::{SidComposer, DEFAULT_BASE};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizeConfig {
    pub levels: usize,
    pub codebook_size: usize,
    pub base: u64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for QuantizeConfig {
    fn default() -> Self {
        Self { levels: 3, codebook_size: 64, base: DEFAULT_BASE, max_iters: 50, tol: 1e-6, seed: 42 }
    }
}

/// Fits residual codebooks to the catalog's content embeddings. With three levels
/// every item also gets its semantic-ID set; other depths only fit the codebooks.
pub fn quantize_catalog(catalog: &mut [Item], cfg: &QuantizeConfig) -> Result<CodebookStack> {
    let rows: Vec<Vec<f64>> = catalog.iter().map(|it| it.content_embedding.clone()).collect();
    let points = Matrix::from_rows(&rows).ok_or(QuantizerError::TooFewPoints { points: 0, clusters: cfg.codebook_size })?;
    let kmeans = KMeansConfig { max_iters: cfg.max_iters, tol: cfg.tol, seed: cfg.seed };
    let stack = quantizer::fit(&points, cfg.levels, cfg.codebook_size, &kmeans)?;
    if cfg.levels == 3 {
        let composer = SidComposer::new(cfg.base, cfg.codebook_size as u64)?;
        for it in catalog.iter_mut() {
            let ids = stack.encode(&it.content_embedding)?;
            it.sids = Some(composer.compose([ids[0] as u64, ids[1] as u64, ids[2] as u64])?);
        }
    }
    Ok(stack)
}

/// The model variants compared in the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Full,
    /// Raw `s3` embedding instead of fused resolutions.
    WithoutMultires,
    /// Fixed `g = 0.5`.
    WithoutGate,
    /// Alignment features zeroed.
    WithoutAlignment,
    /// HID-only baseline.
    Base,
}

impl Variant {
    pub const ABLATIONS: [Variant; 4] =
        [Variant::Full, Variant::WithoutMultires, Variant::WithoutGate, Variant::WithoutAlignment];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "FULL",
            Variant::WithoutMultires => "FULL w/o I",
            Variant::WithoutGate => "FULL w/o II",
            Variant::WithoutAlignment => "FULL w/o III",
            Variant::Base => "base",
        }
    }

    pub fn flags(self) -> AblationFlags {
        let full = AblationFlags::default();
        match self {
            Variant::Full => full,
            Variant::WithoutMultires => AblationFlags { use_multires: false, ..full },
            Variant::WithoutGate => AblationFlags { use_gate: false, ..full },
            Variant::WithoutAlignment => AblationFlags { use_alignment: false, ..full },
            Variant::Base => AblationFlags { hid_only: true, ..full },
        }
    }
}

/// Semantic-ID vocabulary of a quantized catalog.
pub fn catalog_vocab(catalog: &[Item]) -> Result<SidVocab> {
    let sids: Vec<_> = catalog.iter().filter_map(|it| it.sids.as_ref()).collect();
    if sids.is_empty() {
        return Err(ModelError::InvalidConfig {
            field: "catalog",
            reason: "no item has semantic IDs; quantize the catalog with three levels first".into(),
        }
        .into());
    }
    Ok(SidVocab::build(sids)?)
}

/// Freshly initialized parameters for `catalog`, with gate normalization fitted on
/// `stats`.
pub fn init_model(
    catalog: &[Item],
    stats: &ItemStats,
    config: &ModelConfig,
    flags: AblationFlags,
    seed: u64,
) -> Result<ModelParams> {
    let vocab = catalog_vocab(catalog)?;
    let normalizer = GateNormalizer::fit_catalog(catalog, stats);
    Ok(ModelParams::init(config.clone(), flags, vocab, normalizer, seed)?)
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub state: TrainerState,
    pub index: FeatureIndex,
}

/// Trains `params` (fresh or restored) on `log` up to `cfg.epochs` total epochs.
pub fn continue_training(
    mut params: ModelParams,
    mut state: TrainerState,
    catalog: &[Item],
    stats: &ItemStats,
    log: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    let index = FeatureIndex::build(catalog, stats, &params);
    let examples = index.resolve_all(log, &params);
    train(&mut params, &examples, cfg, &mut state)?;
    Ok(TrainedModel { params, state, index })
}

/// Initializes a model with `flags` from `cfg.seed` and trains it.
pub fn train_model(
    catalog: &[Item],
    stats: &ItemStats,
    log: &[Example],
    model: &ModelConfig,
    flags: AblationFlags,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    let params = init_model(catalog, stats, model, flags, cfg.seed)?;
    let state = TrainerState::new(&params);
    continue_training(params, state, catalog, stats, log, cfg)
}

/// Everything needed to train and evaluate variants on one dataset.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub catalog: &'a [Item],
    pub stats: &'a ItemStats,
    pub train: &'a [Example],
    pub eval: &'a [Example],
}

#[derive(Debug, Clone)]
pub struct VariantRun {
    pub variant: Variant,
    pub model: TrainedModel,
    pub report: EvalReport,
}

/// Trains `variant` on `data.train` and evaluates it on `data.eval`.
pub fn run_variant(
    data: Dataset<'_>,
    variant: Variant,
    model: &ModelConfig,
    cfg: &TrainConfig,
    tail_percentile: f64,
) -> Result<VariantRun> {
    let trained = train_model(data.catalog, data.stats, data.train, model, variant.flags(), cfg)?;
    let report = evaluate(&trained.params, &trained.index, data.catalog, data.stats, data.eval, tail_percentile)?;
    Ok(VariantRun { variant, model: trained, report })
}
