//! Command-line pipelines.
//!
//! Configuration comes from three layers: built-in defaults, an optional
//! flat `key = value` file (`--config`), and command-line flags, later
//! layers winning. Every run writes the fully resolved configuration to
//! `manifest-<command>.txt` in the output directory; passing that manifest
//! back via `--config` reproduces the run.

mod pipeline;

use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{RareError, Result};
use crate::eval::DEFAULT_CUTOFFS;
use crate::model::TrainConfig;
use crate::synthgen::SynthSpec;

pub use pipeline::{item_catalog, load_split, run, ABLATION_ORDER};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "rare", version, about = "Risk-aware recommendation with personalized prospect theory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Parse, filter and split a transaction log.
    Ingest,
    /// Estimate per-item rating distributions from the training split.
    FitDist,
    /// Train the risk-aware model (or the BPR baseline with `--baseline bpr`).
    Train,
    /// Rank held-out test items against 100 sampled negatives.
    Evaluate,
    /// Write top-K recommendations from a trained model.
    Recommend,
    /// Generate a synthetic population with known parameters.
    Synth,
    /// Train and evaluate all four model variants.
    Ablate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::FitDist => "fit-dist",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Recommend => "recommend",
            Command::Synth => "synth",
            Command::Ablate => "ablate",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    Bpr,
}

/// Command-line overrides. Every flag maps onto one configuration key.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// Interaction CSV (`user_id,item_id,rating,timestamp,price`).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Flat `key = value` configuration file; a previous run's manifest works.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Latent dimension.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Learning rate.
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// L2 weight on all raw parameters.
    #[arg(long, global = true)]
    pub reg: Option<f64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Sampled alternatives per purchase during training.
    #[arg(long, global = true)]
    pub negatives: Option<usize>,
    /// One of full, no-vf, no-wf, no-rp.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Comma-separated list of K.
    #[arg(long, global = true, value_delimiter = ',')]
    pub cutoffs: Option<Vec<usize>>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub baseline: Option<Baseline>,
    /// Checkpoint to load (defaults to the one in `--out`).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub patience: Option<usize>,
    /// Minimum interactions per user and item.
    #[arg(long, global = true)]
    pub min_count: Option<usize>,
    /// Price for rows without one, or `none` to drop them.
    #[arg(long, global = true)]
    pub price_fallback: Option<String>,
    /// Recommendation list length.
    #[arg(long, global = true)]
    pub topk: Option<usize>,
    /// Recommend for this user only.
    #[arg(long, global = true)]
    pub user: Option<String>,
    #[arg(long, global = true)]
    pub n_users: Option<usize>,
    #[arg(long, global = true)]
    pub n_items: Option<usize>,
    #[arg(long, global = true)]
    pub k_true: Option<usize>,
    #[arg(long, global = true)]
    pub price_min: Option<f64>,
    #[arg(long, global = true)]
    pub price_max: Option<f64>,
    #[arg(long, global = true)]
    pub concentration: Option<f64>,
    #[arg(long, global = true)]
    pub interactions_per_user: Option<usize>,
}

impl Flags {
    fn entries(&self) -> Vec<(&'static str, String)> {
        fn push<T: Display>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
            if let Some(v) = v {
                out.push((key, v.to_string()));
            }
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut out = Vec::new();
        push(&mut out, "data", &path(&self.data));
        push(&mut out, "seed", &self.seed);
        push(&mut out, "k", &self.k);
        push(&mut out, "lr", &self.lr);
        push(&mut out, "reg", &self.reg);
        push(&mut out, "epochs", &self.epochs);
        push(&mut out, "negatives", &self.negatives);
        push(&mut out, "mode", &self.mode);
        push(&mut out, "cutoffs", &self.cutoffs.as_ref().map(|c| join(c)));
        push(&mut out, "out", &path(&self.out));
        push(&mut out, "threads", &self.threads);
        push(&mut out, "baseline", &self.baseline.map(|_| "bpr"));
        push(&mut out, "model", &path(&self.model));
        push(&mut out, "batch_size", &self.batch_size);
        push(&mut out, "patience", &self.patience);
        push(&mut out, "min_count", &self.min_count);
        push(&mut out, "price_fallback", &self.price_fallback);
        push(&mut out, "topk", &self.topk);
        push(&mut out, "user", &self.user);
        push(&mut out, "n_users", &self.n_users);
        push(&mut out, "n_items", &self.n_items);
        push(&mut out, "k_true", &self.k_true);
        push(&mut out, "price_min", &self.price_min);
        push(&mut out, "price_max", &self.price_max);
        push(&mut out, "concentration", &self.concentration);
        push(&mut out, "interactions_per_user", &self.interactions_per_user);
        out
    }
}

fn join(values: &[usize]) -> String {
    values.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub model: Option<PathBuf>,
    pub train: TrainConfig,
    pub cutoffs: Vec<usize>,
    pub min_count: usize,
    pub price_fallback: Option<f64>,
    pub threads: Option<usize>,
    pub baseline: Option<Baseline>,
    pub topk: usize,
    pub user: Option<String>,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        // one `seed` key drives both training and generation
        let synth = SynthSpec {
            seed: train.seed,
            ..SynthSpec::default()
        };
        RunConfig {
            data: None,
            out: PathBuf::from("rare-out"),
            model: None,
            train,
            cutoffs: DEFAULT_CUTOFFS.to_vec(),
            min_count: 10,
            price_fallback: Some(1.0),
            threads: None,
            baseline: None,
            topk: 10,
            user: None,
            synth,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| RareError::Config(format!("invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    /// Applies one `key = value` setting. Hyphens and underscores in keys
    /// are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let optional = |v: &str| (!v.is_empty() && v != "none").then(|| v.to_string());
        match key.as_str() {
            "data" => self.data = optional(value).map(PathBuf::from),
            "out" => self.out = PathBuf::from(value),
            "model" => self.model = optional(value).map(PathBuf::from),
            "seed" => {
                let seed = parse(&key, value)?;
                self.train.seed = seed;
                self.synth.seed = seed;
            }
            "k" => self.train.k = parse(&key, value)?,
            "lr" => self.train.learning_rate = parse(&key, value)?,
            "reg" => self.train.reg_weight = parse(&key, value)?,
            "epochs" => self.train.epochs = parse(&key, value)?,
            "batch_size" => self.train.batch_size = parse(&key, value)?,
            "negatives" => self.train.negatives_per_positive = parse(&key, value)?,
            "patience" => self.train.patience_epochs = parse(&key, value)?,
            "mode" => self.train.mode = value.parse()?,
            "cutoffs" => {
                self.cutoffs = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse(&key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "min_count" => self.min_count = parse(&key, value)?,
            "price_fallback" => self.price_fallback = optional(value).map(|v| parse(&key, &v)).transpose()?,
            "threads" => self.threads = optional(value).map(|v| parse(&key, &v)).transpose()?,
            "baseline" => {
                self.baseline = match optional(value).as_deref() {
                    None => None,
                    Some("bpr") => Some(Baseline::Bpr),
                    Some(other) => return Err(RareError::Config(format!("unknown baseline `{other}`"))),
                }
            }
            "topk" => self.topk = parse(&key, value)?,
            "user" => self.user = optional(value),
            "n_users" => self.synth.n_users = parse(&key, value)?,
            "n_items" => self.synth.n_items = parse(&key, value)?,
            "k_true" => self.synth.k_true = parse(&key, value)?,
            "price_min" => self.synth.price_range.0 = parse(&key, value)?,
            "price_max" => self.synth.price_range.1 = parse(&key, value)?,
            "concentration" => self.synth.dist_concentration = parse(&key, value)?,
            "interactions_per_user" => self.synth.interactions_per_user = parse(&key, value)?,
            // informational manifest keys
            "command" | "version" => {}
            _ => return Err(RareError::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat configuration text: one `key = value` per line, `#`
    /// starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| RareError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(key, value)
                .map_err(|e| RareError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Defaults, then the `--config` file, then explicit flags.
    pub fn resolve(flags: &Flags) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = &flags.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RareError::Config(format!("cannot read config {}: {e}", path.display())))?;
            config.apply_text(&text)?;
        }
        for (key, value) in flags.entries() {
            config.set(key, &value)?;
        }
        Ok(config)
    }

    /// Every setting as `(key, value)`, in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let opt_path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into());
        let t = &self.train;
        let s = &self.synth;
        vec![
            ("data", opt_path(&self.data)),
            ("out", self.out.display().to_string()),
            ("model", opt_path(&self.model)),
            ("seed", t.seed.to_string()),
            ("k", t.k.to_string()),
            ("lr", t.learning_rate.to_string()),
            ("reg", t.reg_weight.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("negatives", t.negatives_per_positive.to_string()),
            ("patience", t.patience_epochs.to_string()),
            ("mode", t.mode.to_string()),
            ("cutoffs", join(&self.cutoffs)),
            ("min_count", self.min_count.to_string()),
            ("price_fallback", self.price_fallback.map(|p| p.to_string()).unwrap_or_else(|| "none".into())),
            ("threads", self.threads.map(|n| n.to_string()).unwrap_or_else(|| "none".into())),
            ("baseline", if self.baseline.is_some() { "bpr" } else { "none" }.into()),
            ("topk", self.topk.to_string()),
            ("user", self.user.clone().unwrap_or_else(|| "none".into())),
            ("n_users", s.n_users.to_string()),
            ("n_items", s.n_items.to_string()),
            ("k_true", s.k_true.to_string()),
            ("price_min", s.price_range.0.to_string()),
            ("price_max", s.price_range.1.to_string()),
            ("concentration", s.dist_concentration.to_string()),
            ("interactions_per_user", s.interactions_per_user.to_string()),
        ]
    }

    pub fn manifest_text(&self, command: Command) -> String {
        let mut text = format!("# rare run manifest\ncommand = {}\nversion = {VERSION}\n", command.name());
        for (key, value) in self.entries() {
            text.push_str(&format!("{key} = {value}\n"));
        }
        text
    }

    pub fn validate(&self, command: Command) -> Result<()> {
        if command != Command::Synth {
            match &self.data {
                None => return Err(RareError::Config("`--data` is required".into())),
                Some(p) if !p.is_file() => {
                    return Err(RareError::Config(format!("data file {} does not exist", p.display())))
                }
                _ => {}
            }
        }
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(RareError::Config("cutoffs must be positive".into()));
        }
        if self.min_count == 0 {
            return Err(RareError::Config("min_count must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(RareError::Config("threads must be positive".into()));
        }
        if let Some(p) = self.price_fallback {
            if !(p.is_finite() && p >= 0.0) {
                return Err(RareError::Config(format!("invalid price fallback {p}")));
            }
        }
        match command {
            Command::Train | Command::Ablate => self.train.validate()?,
            Command::Synth => self.synth.validate()?,
            Command::Evaluate | Command::Recommend => {
                let path = self.model_path();
                if !path.is_file() {
                    return Err(RareError::Config(format!("model checkpoint {} does not exist", path.display())));
                }
                if command == Command::Recommend && self.baseline.is_some() {
                    return Err(RareError::Config("recommend needs a risk-aware model checkpoint".into()));
                }
            }
            Command::Ingest | Command::FitDist => {}
        }
        Ok(())
    }

    /// Checkpoint read by `evaluate`/`recommend` and written by `train`.
    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.out.join(self.default_checkpoint_name()))
    }

    fn default_checkpoint_name(&self) -> &'static str {
        if self.baseline.is_some() {
            "bpr.ckpt"
        } else {
            "model.ckpt"
        }
    }

    pub fn out_path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }
}

/// Name of the manifest file a `command` run leaves in its output directory.
pub fn manifest_file(command: Command) -> String {
    format!("manifest-{}.txt", command.name())
}

/// Writes the resolved configuration of `command` into the output directory.
pub fn write_manifest(config: &RunConfig, command: Command) -> Result<PathBuf> {
    let path = config.out_path(&manifest_file(command));
    std::fs::write(&path, config.manifest_text(command))?;
    Ok(path)
}
