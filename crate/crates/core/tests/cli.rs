mod common;

use std::path::Path;
use std::process::{Command, Output};

use sid_coord::cli::{self, RunConfig, CATALOG_FILE, CHECKPOINT_FILE, CODEBOOK_FILE, EVAL_FILE, STATS_FILE, TRAIN_FILE};
use sid_coord::data::read_catalog;
use sid_coord::linalg::Matrix;
use sid_coord::model::{load_checkpoint, save_checkpoint, Checkpoint, ModelParams, TrainConfig, TrainerState};
use sid_coord::quantizer::{kmeans_plus_plus, read_codebook};
use sid_coord::rng;

use common::{kmeans_oracle, sha256_hex};

const SMALL: &[&str] = &[
    "num_items=200",
    "num_users=40",
    "clusters=8",
    "train_size=3000",
    "eval_size=1500",
    "codebook_size=16",
    "epochs=2",
];

fn sidcoord(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sidcoord")).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path, extra: &[&str]) -> RunConfig {
    let mut sets: Vec<String> = SMALL.iter().map(|s| s.to_string()).collect();
    sets.extend(extra.iter().map(|s| s.to_string()));
    let mut cfg = RunConfig::resolve(None, &sets).unwrap();
    cfg.out_dir = dir.to_path_buf();
    cfg
}

fn prepared(dir: &Path, extra: &[&str]) -> RunConfig {
    let cfg = small_config(dir, extra);
    cli::cmd_gen_data(&cfg).unwrap();
    cli::cmd_quantize(&cfg).unwrap();
    cfg
}

#[test]
fn gen_data_default_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/run");
    let o = sidcoord(&["gen-data", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // Recorded from the first build with the default configuration (seed 42).
    let golden = [
        (CATALOG_FILE, "c43a2f2bc34481cef134c7df2f70cde18fd5ee695ced23e0d5a72d044488de1c"),
        (TRAIN_FILE, "e6edc31ae45a9d023508af3ed98103583e2d4e192bfee5595b68da39b54d9feb"),
        (EVAL_FILE, "584b855892839d157033b447629178d331eab251b8c4dfa409b1c9dcca35020c"),
        (STATS_FILE, "5a871ecce37213a762cc410978d9963351f3d1ec36f83499371912381f24b70d"),
    ];
    for (file, sum) in golden {
        assert_eq!(sha256_hex(&out.join(file)), sum, "{file}");
    }
    let sidecar = std::fs::read_to_string(out.join("gen-data.resolved.cfg")).unwrap();
    let mut back = RunConfig::default();
    back.apply_text(&sidecar, "sidecar").unwrap();
    assert_eq!(back.out_dir, out);
    assert_eq!(back.seed, 42);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = sidcoord(&["gen-data", "--out-dir", d, "--set", "zipf_exponent=-0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("zipf_exponent"));

    assert_eq!(sidcoord(&["gen-data", "--out-dir", d, "--set", "no_such_key=1"]).status.code(), Some(1));
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "seed = 1\nthis line is wrong\n").unwrap();
    let o = sidcoord(&["gen-data", "--out-dir", d, "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(sidcoord(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nnum_items = 50\nnum_users = 10\nclusters = 4\ntrain_size = 100\neval_size = 10\nseed = 3\n").unwrap();
    let d = dir.path().join("out");
    let o = sidcoord(&[
        "gen-data",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "seed=4",
        "--out-dir",
        d.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let resolved = std::fs::read_to_string(d.join("gen-data.resolved.cfg")).unwrap();
    assert!(resolved.contains("seed = 4\n") && resolved.contains("num_items = 50\n"));
    assert_eq!(read_catalog(&d.join(CATALOG_FILE)).unwrap().len(), 50);
}

#[test]
fn missing_inputs_are_runtime_failures() {
    let dir = tempfile::tempdir().unwrap();
    let o = sidcoord(&["train", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn quantize_levels_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepared(dir.path(), &[]);
    let first = std::fs::read(cfg.path(CODEBOOK_FILE)).unwrap();
    let out = cli::cmd_quantize(&cfg).unwrap();
    assert_eq!(std::fs::read(cfg.path(CODEBOOK_FILE)).unwrap(), first);
    assert_eq!(out.level_mse.len(), 3);
    assert!(out.level_mse.windows(2).all(|w| w[1] < w[0]), "{:?}", out.level_mse);
    assert_eq!(out.items_with_sids, 200);
    assert!(read_catalog(&cfg.path(CATALOG_FILE)).unwrap().iter().all(|it| it.sids.is_some()));

    // One level: the fitted MSE equals an independent k-means from the same start.
    let one = RunConfig { levels: 1, ..cfg.clone() };
    let out = cli::cmd_quantize(&one).unwrap();
    let catalog = read_catalog(&cfg.path(CATALOG_FILE)).unwrap();
    let points: Vec<Vec<f64>> = catalog.iter().map(|it| it.content_embedding.clone()).collect();
    let m = Matrix::from_rows(&points).unwrap();
    let init = kmeans_plus_plus(&m, 16, &mut rng::stream(cfg.seed, "quantizer", 0));
    let (centroids, mse) = kmeans_oracle(&points, init.iter_rows().map(<[f64]>::to_vec).collect(), 50, 1e-6);
    assert!((out.level_mse[0] - mse).abs() < 1e-9);
    let stack = read_codebook(&cfg.path(CODEBOOK_FILE)).unwrap();
    for (a, b) in stack.codebook(0).iter_rows().zip(&centroids) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn train_persists_flags_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let long = prepared(dir.path(), &["epochs=3", "use_gate=false"]);
    cli::cmd_train(&long).unwrap();
    let long_ck = load_checkpoint(&long.path(CHECKPOINT_FILE)).unwrap();
    assert!(!long_ck.params.flags.use_gate);
    assert_eq!(long_ck.trainer.loss_curve.len(), 3);

    let split_dir = dir.path().join("split");
    std::fs::create_dir_all(&split_dir).unwrap();
    for f in [CATALOG_FILE, TRAIN_FILE, EVAL_FILE, STATS_FILE] {
        std::fs::copy(long.path(f), split_dir.join(f)).unwrap();
    }
    let first = RunConfig { out_dir: split_dir.clone(), epochs: 1, ..long.clone() };
    cli::cmd_train(&first).unwrap();
    let resumed_from = split_dir.join("first.json");
    std::fs::rename(first.path(CHECKPOINT_FILE), &resumed_from).unwrap();
    let second = RunConfig { resume: resumed_from.display().to_string(), ..first.clone() };
    let second = RunConfig { epochs: 3, ..second };
    let out = cli::cmd_train(&second).unwrap();
    let split_ck = load_checkpoint(&second.path(CHECKPOINT_FILE)).unwrap();
    assert_eq!(split_ck.params, long_ck.params);
    assert_eq!(out.loss_curve, long_ck.trainer.loss_curve);

    // Resuming with different ablation flags is refused.
    let mismatched = RunConfig { use_gate: true, ..second };
    assert!(cli::cmd_train(&mismatched).is_err());
}

#[test]
fn zero_learning_rate_keeps_initial_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepared(dir.path(), &["lr=0", "epochs=1"]);
    cli::cmd_train(&cfg).unwrap();
    let ck = load_checkpoint(&cfg.path(CHECKPOINT_FILE)).unwrap();
    let catalog = read_catalog(&cfg.path(CATALOG_FILE)).unwrap();
    let stats = sid_coord::data::read_stats(&cfg.path(STATS_FILE)).unwrap();
    let fresh = sid_coord::experiment::init_model(&catalog, &stats, &cfg.model(), cfg.flags(), cfg.seed).unwrap();
    assert_eq!(ck.params, fresh);
}

#[test]
fn eval_of_zero_model_and_gate_report_contract() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepared(dir.path(), &["eval_size=20000"]);
    let catalog = read_catalog(&cfg.path(CATALOG_FILE)).unwrap();
    let stats = sid_coord::data::read_stats(&cfg.path(STATS_FILE)).unwrap();
    let init = sid_coord::experiment::init_model(&catalog, &stats, &cfg.model(), cfg.flags(), 1).unwrap();
    let zero = ModelParams::zeros(cfg.model(), cfg.flags(), init.sid.vocab.clone(), init.normalizer.clone()).unwrap();
    let state = TrainerState::new(&zero);
    save_checkpoint(&cfg.path(CHECKPOINT_FILE), &Checkpoint::new(zero, state, TrainConfig::default())).unwrap();

    let report = cli::cmd_eval(&cfg).unwrap();
    let auc = report.auc_all.unwrap();
    assert!((0.48..=0.52).contains(&auc), "{auc}");
    assert_eq!(report.n_examples, 20000);
    assert!(report.n_tail_examples > 0 && report.auc_tail.is_some() && report.uauc_all.is_some());
    let gate = report.gate.as_ref().expect("gating enabled");
    assert!(gate.deciles.iter().all(|d| d.mean_g == 0.5));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(cfg.path("report.json")).unwrap()).unwrap();
    for key in ["auc_all", "uauc_all", "auc_tail", "uauc_tail", "n_examples", "n_users", "n_tail_examples"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    let d = dir.path().to_str().unwrap();
    assert!(sidcoord(&["gate-report", "--out-dir", d]).status.success());

    // Without gating the report omits the table and gate-report refuses.
    let off = sid_coord::experiment::init_model(&catalog, &stats, &cfg.model(), sid_coord::model::AblationFlags {
        use_gate: false,
        ..Default::default()
    }, 1)
    .unwrap();
    let state = TrainerState::new(&off);
    save_checkpoint(&cfg.path(CHECKPOINT_FILE), &Checkpoint::new(off, state, TrainConfig::default())).unwrap();
    assert!(cli::cmd_eval(&cfg).unwrap().gate.is_none());
    let o = sidcoord(&["gate-report", "--out-dir", d]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gating"));
}

#[test]
fn ablate_prints_table_two_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepared(dir.path(), &["ablate_base=false", "epochs=1"]);
    let out = cli::cmd_ablate(&cfg).unwrap();
    let names: Vec<&str> = out.rows.iter().map(|r| r.0.as_str()).collect();
    assert_eq!(names, ["FULL", "FULL w/o I", "FULL w/o II", "FULL w/o III"]);
    let lines: Vec<&str> = out.table.lines().collect();
    assert!(lines[0].contains("ALL") && lines[0].contains("Long-tail"));
    assert_eq!(lines[1].split_whitespace().collect::<Vec<_>>(), ["Model", "AUC", "UAUC", "AUC", "UAUC"]);
    assert!(!lines[2].contains('%'));
    for l in &lines[3..] {
        assert_eq!(l.matches('%').count(), 2, "{l}");
    }
    assert_eq!(std::fs::read_to_string(cfg.path("ablation.txt")).unwrap(), out.table);
}

#[test]
fn grad_check_passes_and_catches_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepared(dir.path(), &[]);
    let d = dir.path().to_str().unwrap();
    let sets: Vec<String> = SMALL.iter().flat_map(|s| ["--set".to_string(), s.to_string()]).collect();
    let mut args = vec!["grad-check", "--out-dir", d];
    args.extend(sets.iter().map(String::as_str));
    let o = sidcoord(&args);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.contains("PASS"));
    for group in ["fusion", "gate", "autodis", "backbone", "hid_table", "sid_table", "user_table"] {
        assert!(stdout.lines().any(|l| l.starts_with(group)), "{group}");
    }

    args.extend(["--corrupt-group", "gate"]);
    let o = sidcoord(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    let report = cli::cmd_grad_check(&cfg, Some(sid_coord::model::ParamGroup::Gate)).unwrap();
    let gate = report.groups.iter().find(|g| g.group == "gate").unwrap();
    assert!(gate.max_rel_error > 1e-4 && gate.worst.is_some());

    args.pop();
    args.push("nonsense");
    assert_eq!(sidcoord(&args).status.code(), Some(1));
}
