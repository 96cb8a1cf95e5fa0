//! Optimiser settings: built-in defaults, then an optional TOML or JSON
//! config file, then command-line flags. Seeds additionally honour the
//! `SYMFIELD_SEED` environment variable.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use symfield_core::{Algorithm, Loss, OptimizerConfig};

use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "SYMFIELD_SEED";

/// Contents of a `--config` file. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub algorithm: Option<Algorithm>,
    pub loss: Option<Loss>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub adagrad_epsilon: Option<f64>,
    pub elbow_ratio: Option<f64>,
    pub escalation_threshold: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
            toml::from_str(&text).map_err(|source| CliError::Toml { path: path.to_path_buf(), source })
        } else {
            serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    #[value(name = "riemannian-adagrad", alias = "adagrad")]
    Adagrad,
    #[value(name = "riemannian-sgd", alias = "sgd")]
    Sgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    #[value(name = "mean-absolute", alias = "l1")]
    MeanAbsolute,
    #[value(name = "mean-squared", alias = "mse")]
    MeanSquared,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Adagrad => Algorithm::RiemannianAdagrad,
            AlgorithmArg::Sgd => Algorithm::RiemannianSgd,
        }
    }
}

impl From<LossArg> for Loss {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::MeanAbsolute => Loss::MeanAbsolute,
            LossArg::MeanSquared => Loss::MeanSquared,
        }
    }
}

/// Seed precedence: explicit flag, then `SYMFIELD_SEED`, then the config
/// file, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::invalid(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(file.unwrap_or(0)),
        Err(e) => Err(CliError::invalid(format!("{SEED_ENV}: {e}"))),
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct OptimArgs {
    /// TOML (by extension) or JSON file with algorithm, loss, learning_rate,
    /// epochs, seed, adagrad_epsilon, elbow_ratio, escalation_threshold.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Optimiser settings after all overrides, plus the raw file for the
/// command-specific keys.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub optimizer: OptimizerConfig,
    pub file: ConfigFile,
}

impl OptimArgs {
    pub fn resolve(&self) -> Result<Resolved> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let mut c = OptimizerConfig::default();
        if let Some(a) = file.algorithm {
            c.algorithm = a;
        }
        if let Some(l) = file.loss {
            c.loss = l;
        }
        if let Some(v) = file.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = file.epochs {
            c.epochs = v;
        }
        if let Some(v) = file.adagrad_epsilon {
            c.adagrad_epsilon = v;
        }
        if let Some(a) = self.algorithm {
            c.algorithm = a.into();
        }
        if let Some(l) = self.loss {
            c.loss = l.into();
        }
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        c.seed = resolve_seed(self.seed, file.seed)?;
        c.validate()?;
        Ok(Resolved { optimizer: c, file })
    }
}
