//! Bandit environments.
//!
//! Every round is a pure function of `(seed, t)`: arms for synthetic kinds are
//! i.i.d. uniform directions on the unit sphere, classification rounds stream
//! dataset rows without replacement and reshuffle between epochs. Reward noise
//! is keyed by `(seed, t, arm)`, so two policies facing the same environment
//! see the same rounds regardless of what they choose.

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{BanditError, Result};
use crate::nn::dot;
use crate::rng::{self, tag};

/// Largest `k · d0` accepted for classification arms.
pub const MAX_CLASSIFICATION_DIM: usize = 4096;

/// One arm's feature vector. Environments only emit unit-norm arms.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmContext(pub Vec<f64>);

impl ArmContext {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundContext {
    pub arms: Vec<ArmContext>,
    /// Hidden `h(x)` per arm; only the regret accountant and the oracle policy read it.
    pub expected_rewards: Vec<f64>,
    pub round_index: usize,
}

impl RoundContext {
    pub fn new(arms: Vec<ArmContext>, expected_rewards: Vec<f64>, round_index: usize) -> Result<Self> {
        if arms.len() != expected_rewards.len() {
            return Err(BanditError::DimensionMismatch {
                expected: arms.len(),
                got: expected_rewards.len(),
            });
        }
        if arms.is_empty() {
            return Err(BanditError::InvalidConfig("a round needs at least one arm".into()));
        }
        if expected_rewards.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(BanditError::InvalidConfig("expected rewards must lie in [0, 1]".into()));
        }
        Ok(Self {
            arms,
            expected_rewards,
            round_index,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn dim(&self) -> usize {
        self.arms[0].dim()
    }

    pub fn best_expected(&self) -> f64 {
        self.expected_rewards
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-round pseudo-regret `max_i h(x_i) − h(x_chosen)`.
pub fn pseudo_regret(round: &RoundContext, chosen: usize) -> Result<f64> {
    let picked = *round
        .expected_rewards
        .get(chosen)
        .ok_or(BanditError::IndexOutOfRange {
            index: chosen,
            len: round.n_arms(),
        })?;
    Ok((round.best_expected() - picked).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    /// `clamp(h + N(0, σ²), 0, 1)`.
    Gaussian(f64),
    /// `1` with probability `h`, else `0`.
    Bernoulli,
    None,
}

impl Noise {
    pub fn apply<R: Rng + ?Sized>(&self, expected: f64, rng: &mut R) -> f64 {
        match *self {
            Noise::Gaussian(sigma) => {
                let z: f64 = StandardNormal.sample(rng);
                (expected + sigma * z).clamp(0.0, 1.0)
            }
            Noise::Bernoulli => {
                if rng.random::<f64>() < expected {
                    1.0
                } else {
                    0.0
                }
            }
            Noise::None => expected,
        }
    }
}

impl std::str::FromStr for Noise {
    type Err = BanditError;

    /// `gaussian:SIGMA`, `gaussian` (σ = 0.05), `bernoulli`, or `none`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || BanditError::InvalidConfig(format!("unknown noise model `{s}`"));
        match s.split_once(':') {
            Some(("gaussian", sigma)) => {
                let sigma: f64 = sigma.trim().parse().map_err(|_| bad())?;
                if !sigma.is_finite() || sigma < 0.0 {
                    return Err(bad());
                }
                Ok(Noise::Gaussian(sigma))
            }
            Some(_) => Err(bad()),
            None => match s {
                "gaussian" => Ok(Noise::Gaussian(0.05)),
                "bernoulli" => Ok(Noise::Bernoulli),
                "none" => Ok(Noise::None),
                _ => Err(bad()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardModel {
    /// `(⟨x,θ*⟩ + 1) / 2`
    Linear,
    /// `⟨x,θ*⟩²`
    Quadratic,
    /// `(cos(3π⟨x,θ*⟩) + 1) / 2`
    Cosine,
}

impl RewardModel {
    pub fn expected(&self, x: &[f64], theta: &[f64]) -> f64 {
        let s = dot(x, theta);
        let h = match self {
            RewardModel::Linear => (s + 1.0) / 2.0,
            RewardModel::Quadratic => s * s,
            RewardModel::Cosine => ((3.0 * std::f64::consts::PI * s).cos() + 1.0) / 2.0,
        };
        h.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationDataset {
    pub rows: Vec<(Vec<f64>, usize)>,
    pub n_classes: usize,
}

impl ClassificationDataset {
    pub fn new(rows: Vec<(Vec<f64>, usize)>, n_classes: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(BanditError::NoDataRows);
        }
        if n_classes < 2 {
            return Err(BanditError::InvalidConfig(
                "classification datasets need at least 2 classes".into(),
            ));
        }
        let d0 = rows[0].0.len();
        if d0 == 0 {
            return Err(BanditError::InvalidConfig("no feature columns".into()));
        }
        for (i, (x, label)) in rows.iter().enumerate() {
            if x.len() != d0 {
                return Err(BanditError::DimensionMismatch {
                    expected: d0,
                    got: x.len(),
                });
            }
            if *label >= n_classes {
                return Err(BanditError::IndexOutOfRange {
                    index: *label,
                    len: n_classes,
                });
            }
            if x.iter().any(|v| !v.is_finite()) || x.iter().all(|&v| v == 0.0) {
                return Err(BanditError::InvalidConfig(format!(
                    "row {i}: feature vector must be finite and non-zero"
                )));
            }
        }
        if n_classes * d0 > MAX_CLASSIFICATION_DIM {
            return Err(BanditError::InvalidConfig(format!(
                "arm dimension {} exceeds the cap of {MAX_CLASSIFICATION_DIM}",
                n_classes * d0
            )));
        }
        Ok(Self { rows, n_classes })
    }

    pub fn feature_dim(&self) -> usize {
        self.rows[0].0.len()
    }

    /// Isotropic Gaussian clusters around random class centres.
    pub fn gaussian_blobs(n_classes: usize, feature_dim: usize, n_rows: usize, spread: f64, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, &[]);
        let centres: Vec<Vec<f64>> = (0..n_classes)
            .map(|_| (0..feature_dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let rows = (0..n_rows)
            .map(|_| {
                let label = rng.random_range(0..n_classes);
                let x = centres[label]
                    .iter()
                    .map(|c| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        c + spread * z
                    })
                    .collect();
                (x, label)
            })
            .collect();
        Self::new(rows, n_classes)
    }
}

/// Reads a headered CSV whose `label_column` holds 0-based integer classes.
///
/// Every other column is a real-valued feature. The number of classes is
/// `max label + 1`. Features are not normalized here.
pub fn load_csv_dataset(path: &Path, label_column: &str) -> Result<ClassificationDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() {
        return Err(BanditError::NoDataRows);
    }
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| BanditError::UnknownLabelColumn(label_column.to_string()))?;

    let mut rows = Vec::new();
    let mut max_label = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut features = Vec::with_capacity(record.len().saturating_sub(1));
        let mut label = None;
        for (i, field) in record.iter().enumerate() {
            let field = field.trim();
            if i == label_idx {
                let v: usize = field.parse().map_err(|_| BanditError::Parse {
                    line,
                    message: format!("label `{field}` is not a non-negative integer"),
                })?;
                label = Some(v);
            } else {
                let v: f64 = field.parse().map_err(|_| BanditError::Parse {
                    line,
                    message: format!("feature `{field}` in column {} is not numeric", i + 1),
                })?;
                if !v.is_finite() {
                    return Err(BanditError::Parse {
                        line,
                        message: format!("feature in column {} is not finite", i + 1),
                    });
                }
                features.push(v);
            }
        }
        let label = label.expect("record length checked by the csv reader");
        if features.iter().all(|&v| v == 0.0) {
            return Err(BanditError::Parse {
                line,
                message: "all-zero feature vector".into(),
            });
        }
        max_label = max_label.max(label);
        rows.push((features, label));
    }
    if rows.is_empty() {
        return Err(BanditError::NoDataRows);
    }
    ClassificationDataset::new(rows, max_label + 1)
}

fn csv_error(path: &Path, e: csv::Error) -> BanditError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => BanditError::io(path, io),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => BanditError::Parse {
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        other => BanditError::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Turns one labelled row into a `k`-arm round of block-embedded vectors.
///
/// Arm `i` is `(0, …, x, …, 0)` with `x` in block `i`; the arm whose block
/// matches the row's class has expected reward 1, every other arm 0.
pub fn classification_to_bandit(
    dataset: &ClassificationDataset,
    row_index: usize,
    normalize: bool,
) -> Result<RoundContext> {
    let (x, label) = dataset.rows.get(row_index).ok_or(BanditError::IndexOutOfRange {
        index: row_index,
        len: dataset.rows.len(),
    })?;
    let k = dataset.n_classes;
    let d0 = x.len();
    let scale = if normalize { 1.0 / dot(x, x).sqrt() } else { 1.0 };
    let arms = (0..k)
        .map(|i| {
            let mut v = vec![0.0; k * d0];
            for (dst, src) in v[i * d0..(i + 1) * d0].iter_mut().zip(x) {
                *dst = src * scale;
            }
            ArmContext(v)
        })
        .collect();
    let rewards = (0..k).map(|i| if i == *label { 1.0 } else { 0.0 }).collect();
    RoundContext::new(arms, rewards, row_index + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvKind {
    Synthetic(RewardModel),
    Classification(Arc<ClassificationDataset>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub dim: usize,
    pub n_arms: usize,
    /// Unit-norm `θ*` for synthetic kinds, empty for classification.
    pub hidden_param: Vec<f64>,
    pub noise: Noise,
    pub seed: u64,
}

impl EnvSpec {
    /// Synthetic environment with `θ*` drawn uniformly on the sphere from `seed`.
    pub fn synthetic(model: RewardModel, dim: usize, n_arms: usize, noise: Noise, seed: u64) -> Result<Self> {
        let theta = unit_sphere(dim, &mut rng::stream(seed, &[tag::ENV_HIDDEN]));
        Self::synthetic_with_param(model, theta, n_arms, noise, seed)
    }

    pub fn synthetic_with_param(
        model: RewardModel,
        hidden_param: Vec<f64>,
        n_arms: usize,
        noise: Noise,
        seed: u64,
    ) -> Result<Self> {
        let dim = hidden_param.len();
        if dim == 0 {
            return Err(BanditError::InvalidConfig("dimension must be >= 1".into()));
        }
        if n_arms < 2 {
            return Err(BanditError::InvalidConfig("need at least 2 arms".into()));
        }
        let norm = dot(&hidden_param, &hidden_param).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(BanditError::InvalidConfig(format!(
                "hidden parameter must be unit norm, got {norm}"
            )));
        }
        Ok(Self {
            kind: EnvKind::Synthetic(model),
            dim,
            n_arms,
            hidden_param,
            noise,
            seed,
        })
    }

    pub fn classification(dataset: Arc<ClassificationDataset>, noise: Noise, seed: u64) -> Self {
        Self {
            dim: dataset.n_classes * dataset.feature_dim(),
            n_arms: dataset.n_classes,
            kind: EnvKind::Classification(dataset),
            hidden_param: Vec::new(),
            noise,
            seed,
        }
    }

    /// The same environment under a different seed (fresh `θ*` for synthetic kinds).
    pub fn reseeded(&self, seed: u64) -> Result<Self> {
        match &self.kind {
            EnvKind::Synthetic(model) => Self::synthetic(*model, self.dim, self.n_arms, self.noise, seed),
            EnvKind::Classification(data) => Ok(Self::classification(Arc::clone(data), self.noise, seed)),
        }
    }

    /// Round `t` (1-based). Equivalent to a fresh `RoundStream`.
    pub fn next_round(&self, t: usize) -> RoundContext {
        RoundStream::new(self).round(t)
    }

    /// Expected and realized reward of a synthetic arm.
    pub fn reward_of<R: Rng + ?Sized>(&self, arm: &ArmContext, rng: &mut R) -> Result<(f64, f64)> {
        let EnvKind::Synthetic(model) = &self.kind else {
            return Err(BanditError::InvalidConfig(
                "classification rewards depend on the row label, not the arm alone".into(),
            ));
        };
        if arm.dim() != self.dim {
            return Err(BanditError::DimensionMismatch {
                expected: self.dim,
                got: arm.dim(),
            });
        }
        let expected = model.expected(arm.as_slice(), &self.hidden_param);
        Ok((expected, self.noise.apply(expected, rng)))
    }

    /// Realized reward of arm `chosen` in `round`, from the `(seed, t, chosen)` noise stream.
    pub fn realize(&self, round: &RoundContext, chosen: usize) -> Result<f64> {
        let expected = *round
            .expected_rewards
            .get(chosen)
            .ok_or(BanditError::IndexOutOfRange {
                index: chosen,
                len: round.n_arms(),
            })?;
        let mut noise_rng = rng::stream(
            self.seed,
            &[tag::ENV_NOISE, round.round_index as u64, chosen as u64],
        );
        Ok(self.noise.apply(expected, &mut noise_rng))
    }
}

/// Sequential round generator; caches the current epoch's row order.
#[derive(Debug)]
pub struct RoundStream<'a> {
    env: &'a EnvSpec,
    epoch: Option<(usize, Vec<usize>)>,
}

impl<'a> RoundStream<'a> {
    pub fn new(env: &'a EnvSpec) -> Self {
        Self { env, epoch: None }
    }

    pub fn round(&mut self, t: usize) -> RoundContext {
        let env = self.env;
        match &env.kind {
            EnvKind::Synthetic(model) => {
                let mut r = rng::stream(env.seed, &[tag::ENV_ROUND, t as u64]);
                let arms: Vec<ArmContext> = (0..env.n_arms)
                    .map(|_| ArmContext(unit_sphere(env.dim, &mut r)))
                    .collect();
                let rewards = arms
                    .iter()
                    .map(|a| model.expected(a.as_slice(), &env.hidden_param))
                    .collect();
                RoundContext {
                    arms,
                    expected_rewards: rewards,
                    round_index: t,
                }
            }
            EnvKind::Classification(data) => {
                let n = data.rows.len();
                let slot = t.saturating_sub(1);
                let epoch = slot / n;
                if self.epoch.as_ref().is_none_or(|(e, _)| *e != epoch) {
                    let mut order: Vec<usize> = (0..n).collect();
                    order.shuffle(&mut rng::stream(env.seed, &[tag::ENV_EPOCH, epoch as u64]));
                    self.epoch = Some((epoch, order));
                }
                let row = self.epoch.as_ref().expect("just set").1[slot % n];
                let mut round = classification_to_bandit(data, row, true).expect("row in range");
                round.round_index = t;
                round
            }
        }
    }
}

fn unit_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
