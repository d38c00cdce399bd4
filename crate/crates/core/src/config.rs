//! Flat `key = value` experiment files and their resolution into run settings.
//!
//! ```text
//! # quadratic benchmark
//! algo = eenet
//! env = synthetic-quadratic
//! rounds = 2000
//! seeds = 1,2,3
//! lr = 0.01
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::env::{load_csv_dataset, EnvSpec, Noise, RewardModel};
use crate::error::{BanditError, Result};
use crate::policy::{Algorithm, Hyperparams};

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| BanditError::Parse {
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(BanditError::Parse {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// `KEY=VALUE` as given to `--set`.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| BanditError::InvalidConfig(format!("expected key=value, got `{s}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse()
                .map_err(|_| BanditError::InvalidConfig(format!("bad {what} `{p}`")))
        })
        .collect()
}

/// Settings shared by every CLI subcommand, merged from file and flags.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub algos: Option<Vec<Algorithm>>,
    pub env: Option<String>,
    pub rounds: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub dim: Option<usize>,
    pub arms: Option<usize>,
    pub noise: Option<Noise>,
    pub label_column: Option<String>,
    pub hyperparams: Hyperparams,
}

pub const DEFAULT_ROUNDS: usize = 5000;
pub const DEFAULT_DIM: usize = 10;
pub const DEFAULT_ARMS: usize = 10;

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BanditError::io(path, e))?;
        let mut s = Settings::default();
        for (k, v) in parse_kv(&text)? {
            s.apply(&k, &v)?;
        }
        Ok(s)
    }

    /// Sets one key; unknown keys are rejected.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |what: &str| -> Result<usize> {
            value
                .parse()
                .map_err(|_| BanditError::InvalidConfig(format!("bad {what} `{value}`")))
        };
        match key {
            "algo" | "algos" => self.algos = Some(parse_list(value, "algorithm")?),
            "env" => self.env = Some(value.to_string()),
            "rounds" => self.rounds = Some(num("rounds")?),
            "seeds" => self.seeds = Some(parse_list(value, "seed")?),
            "out" => self.out = Some(PathBuf::from(value)),
            "dim" => self.dim = Some(num("dim")?),
            "arms" => self.arms = Some(num("arms")?),
            "noise" => self.noise = Some(value.parse()?),
            "label_column" => self.label_column = Some(value.to_string()),
            _ => {
                if !Hyperparams::is_known(key) {
                    return Err(BanditError::UnknownHyperparameter(key.to_string()));
                }
                let v: f64 = value.parse().map_err(|_| {
                    BanditError::InvalidConfig(format!("hyperparameter `{key}` needs a number, got `{value}`"))
                })?;
                self.hyperparams.set(key, v)?;
            }
        }
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.rounds.unwrap_or(DEFAULT_ROUNDS)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| (0..10).collect())
    }

    /// Builds the template environment named by `env`.
    pub fn env_spec(&self) -> Result<EnvSpec> {
        let name = self
            .env
            .as_deref()
            .ok_or_else(|| BanditError::InvalidConfig("missing `env`".into()))?;
        let seed = self.seeds().first().copied().unwrap_or(0);
        if let Some(path) = name.strip_prefix("csv:") {
            let column = self.label_column.as_deref().unwrap_or("label");
            let data = load_csv_dataset(Path::new(path), column)?;
            return Ok(EnvSpec::classification(
                Arc::new(data),
                self.noise.unwrap_or(Noise::Bernoulli),
                seed,
            ));
        }
        let model = match name {
            "synthetic-linear" => RewardModel::Linear,
            "synthetic-quadratic" => RewardModel::Quadratic,
            "synthetic-cosine" => RewardModel::Cosine,
            _ => return Err(BanditError::InvalidConfig(format!("unknown environment `{name}`"))),
        };
        EnvSpec::synthetic(
            model,
            self.dim.unwrap_or(DEFAULT_DIM),
            self.arms.unwrap_or(DEFAULT_ARMS),
            self.noise.unwrap_or(Noise::Gaussian(0.05)),
            seed,
        )
    }
}
