//! EE-Net: an exploitation network `f1` over arm contexts plus an exploration
//! network `f2` that regresses the potential gain `r − f1(x)` from the
//! gradient feature `φ(x)`. Arms are chosen by `argmax f1(x) + f2(φ(x))`.

use std::collections::VecDeque;

use rand::Rng;

use crate::env::{ArmContext, RoundContext};
use crate::error::{BanditError, Result};
use crate::nn::{dot, squared_loss_grad, Mlp, MlpConfig, ParamVector};
use crate::policy::argmax;
use crate::rng::{self, tag};

/// Gradient norms below this fall back to a zero gradient block in `φ`.
pub const DEGENERATE_GRAD_NORM: f64 = 1e-12;

/// Label used to train the exploration network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelVariant {
    /// `r − f1(x)`
    Residual,
    /// `|r − f1(x)|`
    Absolute,
    /// `max(0, r − f1(x))`
    Relu,
}

impl LabelVariant {
    pub fn name(&self) -> &'static str {
        match self {
            LabelVariant::Residual => "residual",
            LabelVariant::Absolute => "absolute",
            LabelVariant::Relu => "relu",
        }
    }
}

impl std::str::FromStr for LabelVariant {
    type Err = BanditError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "residual" => Ok(LabelVariant::Residual),
            "absolute" => Ok(LabelVariant::Absolute),
            "relu" => Ok(LabelVariant::Relu),
            _ => Err(BanditError::InvalidConfig(format!("unknown label variant `{s}`"))),
        }
    }
}

pub fn exploration_label(variant: LabelVariant, reward: f64, f1_pred: f64) -> f64 {
    let gain = reward - f1_pred;
    match variant {
        LabelVariant::Residual => gain,
        LabelVariant::Absolute => gain.abs(),
        LabelVariant::Relu => gain.max(0.0),
    }
}

/// Fixed linear map applied to `∇f1` before normalization.
#[derive(Debug, Clone, PartialEq)]
pub enum Projector {
    Identity,
    /// `k × p` matrix (row-major) with entries `±1/√k`.
    RandomSign { k: usize, p: usize, matrix: Vec<f64> },
}

impl Projector {
    pub fn random_sign(k: usize, p: usize, seed: u64) -> Result<Self> {
        if k == 0 || p == 0 {
            return Err(BanditError::InvalidConfig("projection dims must be >= 1".into()));
        }
        let mut r = rng::stream(seed, &[tag::PROJECTOR]);
        let scale = 1.0 / (k as f64).sqrt();
        let matrix = (0..k * p)
            .map(|_| if r.random::<bool>() { scale } else { -scale })
            .collect();
        Ok(Projector::RandomSign { k, p, matrix })
    }

    pub fn output_dim(&self, p: usize) -> usize {
        match self {
            Projector::Identity => p,
            Projector::RandomSign { k, .. } => *k,
        }
    }

    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        match self {
            Projector::Identity => Ok(g.to_vec()),
            Projector::RandomSign { k, p, matrix } => {
                if g.len() != *p {
                    return Err(BanditError::DimensionMismatch {
                        expected: *p,
                        got: g.len(),
                    });
                }
                Ok((0..*k).map(|r| dot(&matrix[r * p..(r + 1) * p], g)).collect())
            }
        }
    }
}

/// `φ(x) = (g'/(√2‖g'‖), x/√2)` where `g'` is the projected `∇f1(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientFeature(pub Vec<f64>);

impl GradientFeature {
    pub fn build(projected_grad: &[f64], x: &[f64]) -> Self {
        let norm = dot(projected_grad, projected_grad).sqrt();
        let mut v = Vec::with_capacity(projected_grad.len() + x.len());
        if norm >= DEGENERATE_GRAD_NORM {
            let s = 1.0 / (std::f64::consts::SQRT_2 * norm);
            v.extend(projected_grad.iter().map(|g| g * s));
        } else {
            v.extend(std::iter::repeat_n(0.0, projected_grad.len()));
        }
        v.extend(x.iter().map(|xi| xi / std::f64::consts::SQRT_2));
        GradientFeature(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EENetConfig {
    pub width: usize,
    pub depth: usize,
    pub lr1: f64,
    pub lr2: f64,
    /// Projected gradient dimension; `None` feeds the full gradient to `f2`.
    pub proj_dim: Option<usize>,
    pub variant: LabelVariant,
    /// Train on the last `replay` samples each round; 0 disables replay.
    pub replay: usize,
    pub seed: u64,
}

impl Default for EENetConfig {
    fn default() -> Self {
        Self {
            width: 100,
            depth: 2,
            lr1: 0.01,
            lr2: 0.01,
            proj_dim: Some(10),
            variant: LabelVariant::Residual,
            replay: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EENetState {
    pub f1: Mlp,
    pub f2: Mlp,
    pub projector: Projector,
    pub lr1: f64,
    pub lr2: f64,
    pub variant: LabelVariant,
    replay_cap: usize,
    replay: VecDeque<(ArmContext, f64)>,
}

impl EENetState {
    pub fn new(input_dim: usize, cfg: &EENetConfig) -> Result<Self> {
        let f1 = Mlp::init(MlpConfig::new(
            input_dim,
            cfg.width,
            cfg.depth,
            rng::mix_seed(cfg.seed, &[tag::NET_F1]),
        )?);
        let p1 = f1.param_count();
        let projector = match cfg.proj_dim {
            Some(k) => Projector::random_sign(k, p1, cfg.seed)?,
            None => Projector::Identity,
        };
        let f2 = Mlp::init(MlpConfig::new(
            projector.output_dim(p1) + input_dim,
            cfg.width,
            cfg.depth,
            rng::mix_seed(cfg.seed, &[tag::NET_F2]),
        )?);
        let mut state = Self::from_parts(f1, f2, projector, cfg.lr1, cfg.lr2, cfg.variant)?;
        state.replay_cap = cfg.replay;
        Ok(state)
    }

    pub fn from_parts(
        f1: Mlp,
        f2: Mlp,
        projector: Projector,
        lr1: f64,
        lr2: f64,
        variant: LabelVariant,
    ) -> Result<Self> {
        for lr in [lr1, lr2] {
            if !lr.is_finite() || lr < 0.0 {
                return Err(BanditError::InvalidConfig(format!("learning rate {lr} must be >= 0")));
            }
        }
        let expected = projector.output_dim(f1.param_count()) + f1.input_dim();
        if f2.input_dim() != expected {
            return Err(BanditError::DimensionMismatch {
                expected,
                got: f2.input_dim(),
            });
        }
        if let Projector::RandomSign { p, .. } = &projector {
            if *p != f1.param_count() {
                return Err(BanditError::DimensionMismatch {
                    expected: f1.param_count(),
                    got: *p,
                });
            }
        }
        Ok(Self {
            f1,
            f2,
            projector,
            lr1,
            lr2,
            variant,
            replay_cap: 0,
            replay: VecDeque::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.f1.input_dim()
    }

    fn feature_from_grad(&self, grad: &ParamVector, x: &[f64]) -> Result<GradientFeature> {
        Ok(GradientFeature::build(&self.projector.apply(grad.as_slice())?, x))
    }

    pub fn phi(&self, x: &[f64]) -> Result<GradientFeature> {
        let grad = self.f1.grad_params(x)?;
        self.feature_from_grad(&grad, x)
    }

    /// `(f1(x), f2(φ(x)))` for every arm.
    pub fn scores(&self, round: &RoundContext) -> Result<Vec<(f64, f64)>> {
        round
            .arms
            .iter()
            .map(|arm| {
                let (exploit, grad) = self.f1.forward_with_grad(arm.as_slice())?;
                let phi = self.feature_from_grad(&grad, arm.as_slice())?;
                Ok((exploit, self.f2.forward(phi.as_slice())?))
            })
            .collect()
    }

    pub fn select(&self, round: &RoundContext) -> Result<usize> {
        let combined: Vec<f64> = self.scores(round)?.into_iter().map(|(a, b)| a + b).collect();
        Ok(argmax(&combined))
    }

    /// One warm-start SGD step on each network for the played arm.
    ///
    /// The f2 label and `φ(x)` use `f1` before its step.
    pub fn update(&mut self, x: &ArmContext, reward: f64) -> Result<()> {
        if !reward.is_finite() {
            return Err(BanditError::NonFinite("reward"));
        }
        if self.replay_cap <= 1 {
            return self.step(x.as_slice(), reward);
        }
        if self.replay.len() == self.replay_cap {
            self.replay.pop_front();
        }
        self.replay.push_back((x.clone(), reward));
        let samples: Vec<(ArmContext, f64)> = self.replay.iter().cloned().collect();
        for (arm, r) in &samples {
            self.step(arm.as_slice(), *r)?;
        }
        Ok(())
    }

    fn step(&mut self, x: &[f64], reward: f64) -> Result<()> {
        let (pred, grad) = self.f1.forward_with_grad(x)?;
        let phi = self.feature_from_grad(&grad, x)?;
        let label = exploration_label(self.variant, reward, pred);

        self.f1
            .sgd_step(&grad.scaled(squared_loss_grad(pred, reward)), self.lr1)?;
        self.f2.train_step(phi.as_slice(), label, self.lr2)?;
        Ok(())
    }
}
