use std::fs;
use std::path::PathBuf;

use rand::seq::index::sample;

use super::*;
use crate::data::{self, SyntheticData};
use crate::eval::{ablation_table, evaluate, gate_report, EvalReport, GateReport};
use crate::experiment::{continue_training, init_model, quantize_catalog, run_variant, Dataset, Variant};
use crate::model::{
    grad_check, jitter_dense, load_checkpoint, save_checkpoint, Checkpoint, FeatureIndex, GradCheckConfig, GradCheckReport,
    TrainerState,
};
use crate::quantizer::{write_codebook, write_codebook_json};
use crate::rng;

fn write_text(path: PathBuf, text: &str) -> Result<(), Error> {
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<(), Error> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(cfg.out_dir.display().to_string(), e))
}

/// Generates the synthetic dataset and writes catalog, train log, eval log and stats.
pub fn cmd_gen_data(cfg: &RunConfig) -> Result<SyntheticData, Error> {
    let data = data::generate(&cfg.generator())?;
    ensure_out_dir(cfg)?;
    data::write_catalog(&cfg.path(CATALOG_FILE), &data.catalog)?;
    data::write_log(&cfg.path(TRAIN_FILE), &data.train)?;
    data::write_log(&cfg.path(EVAL_FILE), &data.eval)?;
    data::write_stats(&cfg.path(STATS_FILE), &data.stats)?;
    Ok(data)
}

#[derive(Debug, Clone)]
pub struct QuantizeOutput {
    pub level_mse: Vec<f64>,
    pub items_with_sids: usize,
}

impl QuantizeOutput {
    pub fn table(&self) -> String {
        let mut out = String::from("level  mse\n");
        for (l, m) in self.level_mse.iter().enumerate() {
            out.push_str(&format!("{:>5}  {m:.9}\n", l + 1));
        }
        out.push_str(&format!("semantic IDs assigned to {} items\n", self.items_with_sids));
        out
    }
}

/// Fits the codebooks, writes them in binary and JSON form, and rewrites the catalog
/// with semantic IDs (three levels only).
pub fn cmd_quantize(cfg: &RunConfig) -> Result<QuantizeOutput, Error> {
    let catalog_path = cfg.path(CATALOG_FILE);
    let mut catalog = data::read_catalog(&catalog_path)?;
    let stack = quantize_catalog(&mut catalog, &cfg.quantize())?;
    write_codebook(&cfg.path(CODEBOOK_FILE), &stack)?;
    write_codebook_json(&cfg.path(CODEBOOK_JSON_FILE), &stack)?;
    let items_with_sids = catalog.iter().filter(|it| it.sids.is_some()).count();
    if items_with_sids > 0 {
        data::write_catalog(&catalog_path, &catalog)?;
    }
    Ok(QuantizeOutput { level_mse: stack.fit_stats().to_vec(), items_with_sids })
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: PathBuf,
    pub loss_curve: Vec<f64>,
}

/// Trains (or resumes) a model and writes the checkpoint and the loss curve.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutput, Error> {
    let catalog = data::read_catalog(&cfg.path(CATALOG_FILE))?;
    let stats = data::read_stats(&cfg.path(STATS_FILE))?;
    let log = data::read_log(&cfg.path(TRAIN_FILE))?;
    let (params, state) = if cfg.resume.is_empty() {
        let params = init_model(&catalog, &stats, &cfg.model(), cfg.flags(), cfg.seed)?;
        let state = TrainerState::new(&params);
        (params, state)
    } else {
        let ck = load_checkpoint(std::path::Path::new(&cfg.resume))?;
        if ck.params.flags != cfg.flags() {
            return Err(ConfigError::Usage(format!(
                "ablation flags of {} differ from the configured ones",
                cfg.resume
            ))
            .into());
        }
        (ck.params, ck.trainer)
    };
    let train_cfg = cfg.train();
    let trained = continue_training(params, state, &catalog, &stats, &log, &train_cfg)?;
    ensure_out_dir(cfg)?;
    let path = cfg.path(CHECKPOINT_FILE);
    save_checkpoint(&path, &Checkpoint::new(trained.params, trained.state.clone(), train_cfg))?;
    let mut curve = String::from("epoch\tloss\n");
    for (e, l) in trained.state.loss_curve.iter().enumerate() {
        curve.push_str(&format!("{}\t{l}\n", e + 1));
    }
    write_text(cfg.path(LOSS_CURVE_FILE), &curve)?;
    Ok(TrainOutput { checkpoint: path, loss_curve: trained.state.loss_curve })
}

/// Evaluates the checkpoint in `out_dir` and writes the JSON report.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport, Error> {
    let ck = load_checkpoint(&cfg.path(CHECKPOINT_FILE))?;
    let catalog = data::read_catalog(&cfg.path(CATALOG_FILE))?;
    let stats = data::read_stats(&cfg.path(STATS_FILE))?;
    let log = data::read_log(&cfg.path(EVAL_FILE))?;
    let index = FeatureIndex::build(&catalog, &stats, &ck.params);
    let report = evaluate(&ck.params, &index, &catalog, &stats, &log, cfg.tail_percentile)?;
    write_text(cfg.path(REPORT_FILE), &report.to_json())?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct AblateOutput {
    pub rows: Vec<(String, EvalReport)>,
    pub table: String,
}

/// Trains FULL and its three ablations (plus the HID-only baseline when
/// `ablate_base` is set) with the same seed and data.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<AblateOutput, Error> {
    use rayon::prelude::*;

    let catalog = data::read_catalog(&cfg.path(CATALOG_FILE))?;
    let stats = data::read_stats(&cfg.path(STATS_FILE))?;
    let train = data::read_log(&cfg.path(TRAIN_FILE))?;
    let eval = data::read_log(&cfg.path(EVAL_FILE))?;
    let ds = Dataset { catalog: &catalog, stats: &stats, train: &train, eval: &eval };
    let mut variants = Variant::ABLATIONS.to_vec();
    if cfg.ablate_base {
        variants.push(Variant::Base);
    }
    let (model, train_cfg) = (cfg.model(), cfg.train());
    let runs = variants
        .par_iter()
        .map(|&v| run_variant(ds, v, &model, &train_cfg, cfg.tail_percentile))
        .collect::<Result<Vec<_>, Error>>()?;
    let rows: Vec<(String, EvalReport)> = runs.into_iter().map(|r| (r.variant.label().to_string(), r.report)).collect();
    let table = ablation_table(&rows);
    ensure_out_dir(cfg)?;
    write_text(cfg.path(ABLATION_FILE), &table)?;
    let json: Vec<serde_json::Value> =
        rows.iter().map(|(name, r)| serde_json::json!({ "model": name, "report": r })).collect();
    write_text(cfg.path(ABLATION_JSON_FILE), &serde_json::to_string_pretty(&json).expect("serializes"))?;
    Ok(AblateOutput { rows, table })
}

const GRAD_CHECK_JITTER: f64 = 0.1;

/// Gradient check on seeded training examples, at a freshly initialized model whose
/// dense parameters are jittered by `GRAD_CHECK_JITTER`.
pub fn cmd_grad_check(cfg: &RunConfig, corrupt: Option<ParamGroup>) -> Result<GradCheckReport, Error> {
    let catalog = data::read_catalog(&cfg.path(CATALOG_FILE))?;
    let stats = data::read_stats(&cfg.path(STATS_FILE))?;
    let log = data::read_log(&cfg.path(TRAIN_FILE))?;
    if log.is_empty() {
        return Err(ModelError::EmptyTrainingSet.into());
    }
    let mut params = init_model(&catalog, &stats, &cfg.model(), cfg.flags(), cfg.seed)?;
    jitter_dense(&mut params, GRAD_CHECK_JITTER, &mut rng::stream(cfg.seed, "grad-check", 2));
    let index = FeatureIndex::build(&catalog, &stats, &params);
    let n = cfg.grad_check_examples.min(log.len());
    let mut picks = sample(&mut rng::stream(cfg.seed, "grad-check", 1), log.len(), n).into_vec();
    picks.sort_unstable();
    let examples: Vec<_> = picks.iter().map(|&i| index.resolve(&log[i], &params)).collect();
    let check = GradCheckConfig { eps: cfg.grad_check_eps, seed: cfg.seed, corrupt, ..GradCheckConfig::default() };
    let report = grad_check(&params, &examples, &check);
    ensure_out_dir(cfg)?;
    write_text(cfg.path(GRAD_CHECK_FILE), &serde_json::to_string_pretty(&report).expect("serializes"))?;
    Ok(report)
}

/// Gate-vs-exposure table of the checkpoint in `out_dir`.
pub fn cmd_gate_report(cfg: &RunConfig) -> Result<GateReport, Error> {
    let ck = load_checkpoint(&cfg.path(CHECKPOINT_FILE))?;
    let catalog = data::read_catalog(&cfg.path(CATALOG_FILE))?;
    let stats = data::read_stats(&cfg.path(STATS_FILE))?;
    let report = gate_report(&ck.params, &catalog, &stats)?;
    write_text(cfg.path(GATE_REPORT_FILE), &serde_json::to_string_pretty(&report).expect("serializes"))?;
    Ok(report)
}
