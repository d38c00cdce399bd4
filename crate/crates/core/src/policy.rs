//! Algorithm registry and the common policy interface used by the harness.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::baselines::{DiagCovariance, KernelState, NeuralExploration, NeuralPolicy, RidgeState};
use crate::eenet::{EENetConfig, EENetState, LabelVariant};
use crate::env::RoundContext;
use crate::error::{BanditError, Result};
use crate::nn::{Mlp, MlpConfig};
use crate::rng::{self, tag, StreamRng};

/// Index of the largest score; the smallest index wins ties and NaN never wins.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    EeNet(LabelVariant),
    LinUcb,
    KernelUcb,
    NeuralEpsilon,
    NeuralUcb,
    NeuralTs,
    Oracle,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 10] = [
        Algorithm::EeNet(LabelVariant::Residual),
        Algorithm::EeNet(LabelVariant::Absolute),
        Algorithm::EeNet(LabelVariant::Relu),
        Algorithm::LinUcb,
        Algorithm::KernelUcb,
        Algorithm::NeuralEpsilon,
        Algorithm::NeuralUcb,
        Algorithm::NeuralTs,
        Algorithm::Oracle,
        Algorithm::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::EeNet(LabelVariant::Residual) => "eenet",
            Algorithm::EeNet(LabelVariant::Absolute) => "eenet-absolute",
            Algorithm::EeNet(LabelVariant::Relu) => "eenet-relu",
            Algorithm::LinUcb => "linucb",
            Algorithm::KernelUcb => "kernelucb",
            Algorithm::NeuralEpsilon => "neural-epsilon",
            Algorithm::NeuralUcb => "neuralucb",
            Algorithm::NeuralTs => "neuralts",
            Algorithm::Oracle => "oracle",
            Algorithm::Random => "random",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = BanditError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "eenet-residual" {
            return Ok(Algorithm::EeNet(LabelVariant::Residual));
        }
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| BanditError::UnknownAlgorithm(s.to_string()))
    }
}

/// Every hyperparameter key the policies understand.
pub const HYPERPARAMETER_KEYS: [&str; 12] = [
    "alpha",
    "depth",
    "epsilon",
    "lambda",
    "lengthscale",
    "lr",
    "lr1",
    "lr2",
    "nu",
    "proj_dim",
    "replay",
    "width",
];

/// Flat `key → real` map with validated keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Hyperparams(BTreeMap<String, f64>);

impl Hyperparams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_known(key: &str) -> bool {
        HYPERPARAMETER_KEYS.contains(&key)
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !Self::is_known(key) {
            return Err(BanditError::UnknownHyperparameter(key.to_string()));
        }
        if !value.is_finite() {
            return Err(BanditError::InvalidConfig(format!("hyperparameter `{key}` must be finite")));
        }
        self.0.insert(key.to_string(), value);
        Ok(())
    }

    pub fn with(mut self, key: &str, value: f64) -> Result<Self> {
        self.set(key, value)?;
        Ok(self)
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn get_or(&self, key: &str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Later values win.
    pub fn merged(&self, other: &Hyperparams) -> Hyperparams {
        let mut out = self.clone();
        out.0.extend(other.0.iter().map(|(k, v)| (k.clone(), *v)));
        out
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
            Some(v) => Err(BanditError::InvalidConfig(format!(
                "hyperparameter `{key}` must be a non-negative integer, got {v}"
            ))),
        }
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

pub const DEFAULT_WIDTH: usize = 100;
pub const DEFAULT_DEPTH: usize = 2;
pub const DEFAULT_LR: f64 = 0.01;

/// A bandit policy as driven by the harness.
pub trait Policy: Send {
    fn select(&mut self, round: &RoundContext) -> Result<usize>;
    fn update(&mut self, round: &RoundContext, chosen: usize, reward: f64) -> Result<()>;
    /// Input dimension the policy was built for, when it has one.
    fn input_dim(&self) -> Option<usize>;
}

impl Policy for EENetState {
    fn select(&mut self, round: &RoundContext) -> Result<usize> {
        EENetState::select(self, round)
    }

    fn update(&mut self, round: &RoundContext, chosen: usize, reward: f64) -> Result<()> {
        EENetState::update(self, &round.arms[chosen], reward)
    }

    fn input_dim(&self) -> Option<usize> {
        Some(EENetState::input_dim(self))
    }
}

impl Policy for RidgeState {
    fn select(&mut self, round: &RoundContext) -> Result<usize> {
        RidgeState::select(self, round)
    }

    fn update(&mut self, round: &RoundContext, chosen: usize, reward: f64) -> Result<()> {
        RidgeState::update(self, round.arms[chosen].as_slice(), reward)
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.dim())
    }
}

struct KernelPolicy {
    state: KernelState,
    dim: usize,
}

impl Policy for KernelPolicy {
    fn select(&mut self, round: &RoundContext) -> Result<usize> {
        self.state.select(round)
    }

    fn update(&mut self, round: &RoundContext, chosen: usize, reward: f64) -> Result<()> {
        self.state.update(round.arms[chosen].as_slice(), reward)
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.dim)
    }
}

impl Policy for NeuralPolicy {
    fn select(&mut self, round: &RoundContext) -> Result<usize> {
        NeuralPolicy::select(self, round)
    }

    fn update(&mut self, round: &RoundContext, chosen: usize, reward: f64) -> Result<()> {
        NeuralPolicy::update(self, &round.arms[chosen], reward)
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.f1.input_dim())
    }
}

/// Plays the arm with the highest hidden expected reward.
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn select(&mut self, round: &RoundContext) -> Result<usize> {
        Ok(argmax(&round.expected_rewards))
    }

    fn update(&mut self, _: &RoundContext, _: usize, _: f64) -> Result<()> {
        Ok(())
    }

    fn input_dim(&self) -> Option<usize> {
        None
    }
}

pub struct RandomPolicy(StreamRng);

impl Policy for RandomPolicy {
    fn select(&mut self, round: &RoundContext) -> Result<usize> {
        Ok(self.0.random_range(0..round.n_arms()))
    }

    fn update(&mut self, _: &RoundContext, _: usize, _: f64) -> Result<()> {
        Ok(())
    }

    fn input_dim(&self) -> Option<usize> {
        None
    }
}

/// Builds a fresh policy for inputs of dimension `dim`.
///
/// Every neural policy initializes `f1` from the same seed-derived stream, so
/// for a given seed they all start from an identical exploitation network.
pub fn build_policy(algorithm: Algorithm, hp: &Hyperparams, dim: usize, seed: u64) -> Result<Box<dyn Policy>> {
    let width = hp.usize_or("width", DEFAULT_WIDTH)?;
    let depth = hp.usize_or("depth", DEFAULT_DEPTH)?;
    let lr = hp.get_or("lr", DEFAULT_LR);
    let lambda = hp.get_or("lambda", 1.0);
    let policy_rng = rng::stream(seed, &[tag::POLICY]);
    let neural = |exploration| -> Result<Box<dyn Policy>> {
        let f1 = Mlp::init(MlpConfig::new(dim, width, depth, rng::mix_seed(seed, &[tag::NET_F1]))?);
        Ok(Box::new(NeuralPolicy::new(f1, lr, exploration, policy_rng.clone())?))
    };
    let p1 = MlpConfig::new(dim, width, depth, 0)?.param_count();
    match algorithm {
        Algorithm::EeNet(variant) => {
            let proj_dim = hp.usize_or("proj_dim", 10)?;
            let cfg = EENetConfig {
                width,
                depth,
                lr1: hp.get("lr1").unwrap_or(lr),
                lr2: hp.get("lr2").unwrap_or(lr),
                proj_dim: (proj_dim > 0).then_some(proj_dim),
                variant,
                replay: hp.usize_or("replay", 0)?,
                seed,
            };
            Ok(Box::new(EENetState::new(dim, &cfg)?))
        }
        Algorithm::LinUcb => Ok(Box::new(RidgeState::new(dim, hp.get_or("alpha", 1.0), lambda)?)),
        Algorithm::KernelUcb => Ok(Box::new(KernelPolicy {
            state: KernelState::new(hp.get_or("lengthscale", 1.0), hp.get_or("nu", 0.1), lambda)?,
            dim,
        })),
        Algorithm::NeuralEpsilon => neural(NeuralExploration::Epsilon(hp.get_or("epsilon", 0.1))),
        Algorithm::NeuralUcb => neural(NeuralExploration::Ucb(DiagCovariance::new(p1, hp.get_or("nu", 0.1), lambda)?)),
        Algorithm::NeuralTs => neural(NeuralExploration::Ts(DiagCovariance::new(p1, hp.get_or("nu", 0.1), lambda)?)),
        Algorithm::Oracle => Ok(Box::new(OraclePolicy)),
        Algorithm::Random => Ok(Box::new(RandomPolicy(policy_rng))),
    }
}
