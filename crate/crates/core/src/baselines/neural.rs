//! Neural baselines over a shared exploitation network `f1`.
//!
//! NeuralUCB and NeuralTS use a diagonal surrogate `z` for the gradient
//! covariance: `σ²(x) = Σ_j g_j² / (m·z_j)` with `g = ∇f1(x)`, and after each
//! round `z ← z + g∘g/m` for the played arm.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::env::{ArmContext, RoundContext};
use crate::error::{BanditError, Result};
use crate::nn::{squared_loss_grad, Mlp, ParamVector};
use crate::policy::argmax;
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagCovariance {
    z: Vec<f64>,
    pub nu: f64,
    pub lambda: f64,
}

impl DiagCovariance {
    pub fn new(param_count: usize, nu: f64, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(BanditError::InvalidConfig(format!("lambda must be > 0, got {lambda}")));
        }
        if !(nu.is_finite() && nu >= 0.0) {
            return Err(BanditError::InvalidConfig(format!("nu must be >= 0, got {nu}")));
        }
        Ok(Self {
            z: vec![lambda; param_count],
            nu,
            lambda,
        })
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.z
    }

    /// `Σ_j g_j² / (m·z_j)`.
    pub fn variance(&self, grad: &ParamVector, width: usize) -> f64 {
        let m = width as f64;
        grad.as_slice()
            .iter()
            .zip(&self.z)
            .map(|(g, z)| g * g / (m * z))
            .sum()
    }

    pub fn update(&mut self, grad: &ParamVector, width: usize) -> Result<()> {
        if grad.len() != self.z.len() {
            return Err(BanditError::DimensionMismatch {
                expected: self.z.len(),
                got: grad.len(),
            });
        }
        let m = width as f64;
        for (z, g) in self.z.iter_mut().zip(grad.as_slice()) {
            *z += g * g / m;
        }
        Ok(())
    }
}

fn exploit_scores(f1: &Mlp, round: &RoundContext) -> Result<Vec<f64>> {
    round.arms.iter().map(|a| f1.forward(a.as_slice())).collect()
}

/// With probability `epsilon` a uniformly random arm, otherwise `argmax f1`.
pub fn neural_epsilon_select(f1: &Mlp, round: &RoundContext, epsilon: f64, rng: &mut StreamRng) -> Result<usize> {
    if rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..round.n_arms()));
    }
    Ok(argmax(&exploit_scores(f1, round)?))
}

/// `argmax f1(x) + ν·σ(x)`.
pub fn neuralucb_select(f1: &Mlp, cov: &DiagCovariance, round: &RoundContext) -> Result<usize> {
    let width = f1.config().width;
    let scores = round
        .arms
        .iter()
        .map(|a| {
            let (mean, grad) = f1.forward_with_grad(a.as_slice())?;
            Ok(mean + cov.nu * cov.variance(&grad, width).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(argmax(&scores))
}

/// One draw `r̂_i ~ N(f1(x_i), ν²σ²(x_i))` per arm.
pub fn neuralts_samples(f1: &Mlp, cov: &DiagCovariance, round: &RoundContext, rng: &mut StreamRng) -> Result<Vec<f64>> {
    let width = f1.config().width;
    round
        .arms
        .iter()
        .map(|a| {
            let (mean, grad) = f1.forward_with_grad(a.as_slice())?;
            let z: f64 = StandardNormal.sample(rng);
            Ok(mean + cov.nu * cov.variance(&grad, width).sqrt() * z)
        })
        .collect()
}

pub fn neuralts_select(f1: &Mlp, cov: &DiagCovariance, round: &RoundContext, rng: &mut StreamRng) -> Result<usize> {
    Ok(argmax(&neuralts_samples(f1, cov, round, rng)?))
}

#[derive(Debug, Clone, PartialEq)]
pub enum NeuralExploration {
    Epsilon(f64),
    Ucb(DiagCovariance),
    Ts(DiagCovariance),
}

/// A neural baseline: one warm-start SGD step on `f1` per round.
#[derive(Debug, Clone)]
pub struct NeuralPolicy {
    pub f1: Mlp,
    pub lr: f64,
    pub exploration: NeuralExploration,
    rng: StreamRng,
}

impl NeuralPolicy {
    pub fn new(f1: Mlp, lr: f64, exploration: NeuralExploration, rng: StreamRng) -> Result<Self> {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(BanditError::InvalidConfig(format!("learning rate {lr} must be >= 0")));
        }
        if let NeuralExploration::Epsilon(eps) = exploration {
            if !(0.0..=1.0).contains(&eps) {
                return Err(BanditError::InvalidConfig(format!("epsilon {eps} must lie in [0, 1]")));
            }
        }
        Ok(Self {
            f1,
            lr,
            exploration,
            rng,
        })
    }

    pub fn select(&mut self, round: &RoundContext) -> Result<usize> {
        match &self.exploration {
            NeuralExploration::Epsilon(eps) => neural_epsilon_select(&self.f1, round, *eps, &mut self.rng),
            NeuralExploration::Ucb(cov) => neuralucb_select(&self.f1, cov, round),
            NeuralExploration::Ts(cov) => neuralts_select(&self.f1, cov, round, &mut self.rng),
        }
    }

    /// Covariance update with the played arm's gradient, then the SGD step.
    pub fn update(&mut self, x: &ArmContext, reward: f64) -> Result<()> {
        if !reward.is_finite() {
            return Err(BanditError::NonFinite("reward"));
        }
        let (pred, grad) = self.f1.forward_with_grad(x.as_slice())?;
        let width = self.f1.config().width;
        match &mut self.exploration {
            NeuralExploration::Ucb(cov) | NeuralExploration::Ts(cov) => cov.update(&grad, width)?,
            NeuralExploration::Epsilon(_) => {}
        }
        self.f1.sgd_step(&grad.scaled(squared_loss_grad(pred, reward)), self.lr)
    }
}
