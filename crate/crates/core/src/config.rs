//! Pipeline configuration and its `key = value` representation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::encoder::Activation;
use crate::error::{Error, Result};
use crate::io::parse_key_values;
use crate::rpcm::{RpcmConfig, TrainSchedule, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selection {
    #[default]
    Random,
    KMeans,
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Selection::Random),
            "kmeans" | "k-means" => Ok(Selection::KMeans),
            other => Err(Error::InvalidConfig(format!(
                "unknown selection `{other}` (expected random or kmeans)"
            ))),
        }
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Random => "random",
            Selection::KMeans => "kmeans",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub data: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub selection: Selection,
    pub reps: usize,
    pub k: usize,
    pub seed: u64,
    pub emit_timings: bool,
    /// Points per forward-pass batch when encoding.
    pub encode_batch: usize,
    pub rpcm: RpcmConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data: None,
            labels: None,
            output: None,
            selection: Selection::Random,
            reps: 88,
            k: 4,
            seed: 0,
            emit_timings: true,
            encode_batch: 4096,
            rpcm: RpcmConfig::default(),
        }
    }
}

/// Every key accepted by [`PipelineConfig::set`].
pub const KEYS: &[&str] = &[
    "data",
    "labels",
    "output",
    "selection",
    "reps",
    "k",
    "seed",
    "emit_timings",
    "encode_batch",
    "variant",
    "alpha_bar",
    "alpha",
    "beta",
    "gamma",
    "mu0",
    "mu_growth",
    "mu_max",
    "eps1",
    "eps2",
    "max_outer",
    "step_safety",
    "train_schedule",
    "hidden",
    "learning_rate",
    "max_epochs",
    "init_scale",
    "hidden_activation",
    "output_activation",
    "use_bias",
    "solve_top_layer",
    "top_layer_ridge",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("bad boolean `{value}` for `{key}`"))),
    }
}

impl PipelineConfig {
    /// Apply one setting. Unknown keys are a usage error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let r = &mut self.rpcm;
        match key.as_str() {
            "data" => self.data = Some(PathBuf::from(value)),
            "labels" => self.labels = Some(PathBuf::from(value)),
            "output" => self.output = Some(PathBuf::from(value)),
            "selection" => self.selection = value.parse()?,
            "reps" => self.reps = parse(&key, value)?,
            "k" => self.k = parse(&key, value)?,
            "seed" => {
                self.seed = parse(&key, value)?;
                r.encoder.seed = self.seed;
            }
            "emit_timings" => self.emit_timings = parse_bool(&key, value)?,
            "encode_batch" => self.encode_batch = parse(&key, value)?,
            "variant" => {
                let variant: Variant = value.parse()?;
                let default_alpha = RpcmConfig::for_variant(variant).alpha;
                if r.alpha == RpcmConfig::for_variant(r.variant).alpha {
                    r.alpha = default_alpha;
                }
                r.variant = variant;
            }
            "alpha_bar" => r.alpha_bar = parse(&key, value)?,
            "alpha" => r.alpha = parse(&key, value)?,
            "beta" => r.beta = parse(&key, value)?,
            "gamma" => r.gamma = parse(&key, value)?,
            "mu0" => r.mu0 = parse(&key, value)?,
            "mu_growth" => r.mu_growth = parse(&key, value)?,
            "mu_max" => r.mu_max = parse(&key, value)?,
            "eps1" => r.eps1 = parse(&key, value)?,
            "eps2" => r.eps2 = parse(&key, value)?,
            "max_outer" => r.max_outer = parse(&key, value)?,
            "step_safety" => r.step_safety = parse(&key, value)?,
            "train_schedule" => r.train_schedule = value.parse::<TrainSchedule>()?,
            "hidden" => {
                r.encoder.hidden_sizes = if value.trim().is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|s| parse(&key, s.trim()))
                        .collect::<Result<_>>()?
                }
            }
            "learning_rate" => r.encoder.learning_rate = parse(&key, value)?,
            "max_epochs" => r.encoder.max_epochs = parse(&key, value)?,
            "init_scale" => r.encoder.init_scale = parse(&key, value)?,
            "hidden_activation" => r.encoder.hidden_activation = value.parse::<Activation>()?,
            "output_activation" => r.encoder.output_activation = value.parse::<Activation>()?,
            "use_bias" => r.encoder.use_bias = parse_bool(&key, value)?,
            "solve_top_layer" => r.encoder.solve_top_layer = parse_bool(&key, value)?,
            "top_layer_ridge" => r.encoder.top_layer_ridge = parse(&key, value)?,
            _ => return Err(Error::InvalidInput(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Apply settings in order.
    pub fn apply<'a>(&mut self, settings: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        for (k, v) in settings {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Settings from a `key = value` file.
    pub fn load(path: &Path) -> Result<Vec<(String, String)>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_key_values(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 representatives, got {}",
                self.reps
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.encode_batch == 0 {
            return Err(Error::InvalidConfig("encode batch must be positive".into()));
        }
        self.rpcm.validate()
    }
}
