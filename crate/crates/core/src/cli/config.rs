//! Flat `key = value` run configuration.
//!
//! A config file holds one `key = value` pair per line; `#` starts a comment and blank
//! lines are ignored. Overrides given on the command line as `--set key=value` are
//! applied after the file. Unknown keys are rejected in both places.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::data::GeneratorConfig;
use crate::experiment::QuantizeConfig;
use crate::model::{AblationFlags, ModelConfig, TrainConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: line {line}: {reason}")]
    Syntax { origin: String, line: usize, reason: String },
    #[error("{origin}: unknown config key `{key}`")]
    UnknownKey { origin: String, key: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("{0}")]
    Usage(String),
}

/// A value that can appear on the right-hand side of `key = value`.
pub trait ConfigValue: Sized {
    fn parse_value(text: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(text: &str) -> Result<Self, String> {
                <$t>::from_str(text).map_err(|e| e.to_string())
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
from_str_value!(usize, u64, f64, bool, String);

impl ConfigValue for PathBuf {
    fn parse_value(text: &str) -> Result<Self, String> {
        Ok(PathBuf::from(text))
    }
    fn render(&self) -> String {
        self.display().to_string()
    }
}

macro_rules! run_config {
    ($($(#[doc = $doc:literal])* $key:ident : $ty:ty = $default:expr;)*) => {
        /// Every setting of a `sidcoord` run.
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $($(#[doc = $doc])* pub $key: $ty,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $($key: $default,)* }
            }
        }

        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($key)),*];

            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<(), ConfigError> {
                let invalid = |reason: String| ConfigError::InvalidValue {
                    key: key.to_string(),
                    value: value.to_string(),
                    reason,
                };
                match key {
                    $(stringify!($key) => self.$key = <$ty as ConfigValue>::parse_value(value).map_err(invalid)?,)*
                    _ => return Err(ConfigError::UnknownKey { origin: origin.to_string(), key: key.to_string() }),
                }
                Ok(())
            }

            /// All keys with their values, one `key = value` line each, in a fixed order.
            pub fn render(&self) -> String {
                let mut out = String::new();
                $(out.push_str(&format!("{} = {}\n", stringify!($key), ConfigValue::render(&self.$key)));)*
                out
            }
        }
    };
}

run_config! {
    /// Directory holding every file a run reads or writes.
    out_dir: PathBuf = PathBuf::from("run");
    /// Checkpoint to continue training from; empty for a fresh model.
    resume: String = String::new();
    /// Root seed; every random stream is derived from it.
    seed: u64 = 42;

    num_items: usize = 1000;
    num_users: usize = 500;
    dim: usize = 16;
    clusters: usize = 16;
    zipf_exponent: f64 = 1.0;
    history_len: usize = 10;
    train_size: usize = 40_000;
    eval_size: usize = 20_000;
    alpha: f64 = 2.0;
    beta: f64 = 2.0;
    cluster_spread: f64 = 0.35;
    interest_share: f64 = 0.5;
    /// Trailing timestamp window for item statistics; 0 uses the whole training log.
    stats_window: u64 = 0;
    like_rate: f64 = 0.3;
    share_rate: f64 = 0.1;
    comment_rate: f64 = 0.15;

    levels: usize = 3;
    codebook_size: usize = 64;
    base: u64 = crate::sid::DEFAULT_BASE;
    kmeans_max_iters: usize = 50;
    kmeans_tol: f64 = 1e-6;

    embed_dim: usize = 16;
    user_dim: usize = 16;
    fusion_hidden: usize = 16;
    gate_hidden: usize = 8;
    autodis_buckets: usize = 16;
    autodis_dim: usize = 8;
    autodis_temperature: f64 = 1.0;
    backbone_hidden: usize = 32;
    hid_buckets: usize = 512;

    use_multires: bool = true;
    use_gate: bool = true;
    use_alignment: bool = true;
    hid_only: bool = false;

    /// Total epochs; a resumed run continues up to this count.
    epochs: usize = TrainConfig::default().epochs;
    lr: f64 = TrainConfig::default().lr;
    batch_size: usize = TrainConfig::default().batch_size;

    tail_percentile: f64 = crate::eval::DEFAULT_TAIL_PERCENTILE;
    /// Also train the HID-only baseline in `ablate`.
    ablate_base: bool = true;

    grad_check_examples: usize = 5;
    grad_check_eps: f64 = 1e-5;
    grad_check_tol: f64 = 1e-4;
}

/// Splits `key = value`; `None` for blank and comment-only lines.
fn parse_line(line: &str) -> Option<Result<(&str, &str), String>> {
    let content = line.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return None;
    }
    Some(match content.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => Err(format!("expected `key = value`, got `{content}`")),
    })
}

impl RunConfig {
    /// Applies every line of a config text.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            match parse_line(line) {
                None => {}
                Some(Ok((k, v))) => self.set(k, v, origin)?,
                Some(Err(reason)) => return Err(ConfigError::Syntax { origin: origin.to_string(), line: i + 1, reason }),
            }
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies one `key=value` command-line override.
    pub fn apply_override(&mut self, pair: &str) -> Result<(), ConfigError> {
        match parse_line(pair) {
            Some(Ok((k, v))) => self.set(k, v, "--set"),
            _ => Err(ConfigError::Usage(format!("--set expects key=value, got `{pair}`"))),
        }
    }

    /// Defaults, then `file`, then `overrides` in order.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        for o in overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg)
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            num_items: self.num_items,
            num_users: self.num_users,
            dim: self.dim,
            clusters: self.clusters,
            zipf_exponent: self.zipf_exponent,
            history_len: self.history_len,
            train_size: self.train_size,
            eval_size: self.eval_size,
            seed: self.seed,
            alpha: self.alpha,
            beta: self.beta,
            cluster_spread: self.cluster_spread,
            interest_share: self.interest_share,
            stats_window: (self.stats_window > 0).then_some(self.stats_window),
            like_rate: self.like_rate,
            share_rate: self.share_rate,
            comment_rate: self.comment_rate,
        }
    }

    pub fn quantize(&self) -> QuantizeConfig {
        QuantizeConfig {
            levels: self.levels,
            codebook_size: self.codebook_size,
            base: self.base,
            max_iters: self.kmeans_max_iters,
            tol: self.kmeans_tol,
            seed: self.seed,
        }
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            user_dim: self.user_dim,
            fusion_hidden: self.fusion_hidden,
            gate_hidden: self.gate_hidden,
            autodis_buckets: self.autodis_buckets,
            autodis_dim: self.autodis_dim,
            autodis_temperature: self.autodis_temperature,
            backbone_hidden: self.backbone_hidden,
            hid_buckets: self.hid_buckets,
            num_users: self.num_users,
        }
    }

    pub fn flags(&self) -> AblationFlags {
        AblationFlags {
            use_multires: self.use_multires,
            use_gate: self.use_gate,
            use_alignment: self.use_alignment,
            hid_only: self.hid_only,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            batch_size: self.batch_size,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}
