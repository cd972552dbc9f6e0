//! The `sidcoord` command.
//!
//! ```text
//! sidcoord <gen-data|quantize|train|eval|ablate|grad-check|gate-report>
//!          [--config FILE] [--set key=value]... [--out-dir DIR]
//! ```
//!
//! All files live in `out_dir`. Every run writes its fully resolved configuration to
//! `<out_dir>/<subcommand>.resolved.cfg`. Exit codes: 0 success, 1 usage or config
//! error, 2 runtime failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_ablate, cmd_eval, cmd_gate_report, cmd_gen_data, cmd_grad_check, cmd_quantize, cmd_train, AblateOutput,
    QuantizeOutput, TrainOutput,
};
pub use config::{ConfigError, ConfigValue, RunConfig};

use crate::data::DataError;
use crate::eval::EvalError;
use crate::model::{ModelError, ParamGroup};
use crate::Error;

pub const CATALOG_FILE: &str = "catalog.jsonl";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const EVAL_FILE: &str = "eval.jsonl";
pub const STATS_FILE: &str = "stats.jsonl";
pub const CODEBOOK_FILE: &str = "codebook.bin";
pub const CODEBOOK_JSON_FILE: &str = "codebook.json";
pub const CHECKPOINT_FILE: &str = "model.json";
pub const LOSS_CURVE_FILE: &str = "loss_curve.tsv";
pub const REPORT_FILE: &str = "report.json";
pub const ABLATION_FILE: &str = "ablation.txt";
pub const ABLATION_JSON_FILE: &str = "ablation.json";
pub const GRAD_CHECK_FILE: &str = "grad_check.json";
pub const GATE_REPORT_FILE: &str = "gate_report.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sidcoord", version, about = "Semantic IDs coordinated with hashed item IDs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// key = value config file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one key; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for `--set out_dir=DIR`.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic catalog, train/eval logs and item statistics.
    GenData(Common),
    /// Fit residual codebooks and attach semantic IDs to the catalog.
    Quantize(Common),
    /// Train a model and write its checkpoint and loss curve.
    Train(Common),
    /// Evaluate the trained checkpoint on the eval log.
    Eval(Common),
    /// Train and evaluate the ablation variants on shared data.
    Ablate(Common),
    /// Compare analytic gradients with central finite differences.
    GradCheck {
        #[command(flatten)]
        common: Common,
        /// Negative control: distort this group's analytic gradient.
        #[arg(long, value_name = "GROUP")]
        corrupt_group: Option<String>,
    },
    /// Mean gate value per exposure decile of the trained checkpoint.
    GateReport(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Quantize(_) => "quantize",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Ablate(_) => "ablate",
            Command::GradCheck { .. } => "grad-check",
            Command::GateReport(_) => "gate-report",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::GenData(c)
            | Command::Quantize(c)
            | Command::Train(c)
            | Command::Eval(c)
            | Command::Ablate(c)
            | Command::GateReport(c) => c,
            Command::GradCheck { common, .. } => common,
        }
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Data(DataError::InvalidConfig { .. })
        | Error::Model(ModelError::InvalidConfig { .. })
        | Error::Eval(EvalError::GateDisabled) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn resolve(common: &Common) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::resolve(common.config.as_deref(), &common.set)?;
    if let Some(dir) = &common.out_dir {
        cfg.out_dir = dir.clone();
    }
    Ok(cfg)
}

fn write_sidecar(cfg: &RunConfig, name: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(cfg.out_dir.display().to_string(), e))?;
    let path = cfg.path(&format!("{name}.resolved.cfg"));
    std::fs::write(&path, cfg.render()).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

fn dispatch(command: &Command, cfg: &RunConfig, out: &mut String) -> Result<i32, Error> {
    use std::fmt::Write;

    match command {
        Command::GenData(_) => {
            let data = cmd_gen_data(cfg)?;
            let _ = writeln!(
                out,
                "wrote {} items, {} train and {} eval examples to {}",
                data.catalog.len(),
                data.train.len(),
                data.eval.len(),
                cfg.out_dir.display()
            );
        }
        Command::Quantize(_) => out.push_str(&cmd_quantize(cfg)?.table()),
        Command::Train(_) => {
            let trained = cmd_train(cfg)?;
            for (epoch, loss) in trained.loss_curve.iter().enumerate() {
                let _ = writeln!(out, "epoch {:>3}  loss {loss:.6}", epoch + 1);
            }
            let _ = writeln!(out, "checkpoint: {}", trained.checkpoint.display());
        }
        Command::Eval(_) => {
            let report = cmd_eval(cfg)?;
            out.push_str(&report.table());
            let _ = writeln!(out, "{}", report.to_json());
        }
        Command::Ablate(_) => out.push_str(&cmd_ablate(cfg)?.table),
        Command::GradCheck { corrupt_group, .. } => {
            let corrupt = match corrupt_group {
                None => None,
                Some(name) => Some(ParamGroup::parse(name).ok_or_else(|| {
                    ConfigError::Usage(format!(
                        "unknown parameter group `{name}`; expected one of {}",
                        ParamGroup::ALL.map(ParamGroup::name).join(", ")
                    ))
                })?),
            };
            let report = cmd_grad_check(cfg, corrupt)?;
            out.push_str(&report.table());
            let ok = report.passes(cfg.grad_check_tol);
            let _ = writeln!(
                out,
                "{}: max relative error {:.3e} (tolerance {:e})",
                if ok { "PASS" } else { "FAIL" },
                report.max_rel_error(),
                cfg.grad_check_tol
            );
            if !ok {
                return Ok(EXIT_RUNTIME);
            }
        }
        Command::GateReport(_) => out.push_str(&cmd_gate_report(cfg)?.table()),
    }
    Ok(EXIT_OK)
}

/// Runs the command line `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = resolve(cli.command.common()).map_err(Error::from).and_then(|cfg| {
        let sidecar = write_sidecar(&cfg, cli.command.name())?;
        eprintln!("resolved config: {}", sidecar.display());
        let mut out = String::new();
        let code = dispatch(&cli.command, &cfg, &mut out);
        // A closed stdout (e.g. piped into `head`) is not an error.
        let _ = std::io::Write::write_all(&mut std::io::stdout(), out.as_bytes());
        code
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
