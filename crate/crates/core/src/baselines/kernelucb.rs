//! KernelUCB with an RBF kernel.
//!
//! `μ(x) = kᵀ(K+λI)⁻¹y`, `σ²(x) = k(x,x) − kᵀ(K+λI)⁻¹k`, `score = μ + ν·σ`.
//! The Cholesky factor of `K + λI` grows by one row per stored context; the
//! history stops growing once it holds `capacity` contexts.

use crate::env::RoundContext;
use crate::error::{BanditError, Result};
use crate::nn::dot;
use crate::policy::argmax;

pub const DEFAULT_CAPACITY: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelState {
    contexts: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    /// Rows of the lower-triangular factor `L` with `LLᵀ = K + λI`.
    chol: Vec<Vec<f64>>,
    /// `(K + λI)⁻¹ y`.
    weights: Vec<f64>,
    capacity: usize,
    pub lengthscale: f64,
    pub nu: f64,
    pub lambda: f64,
}

impl KernelState {
    pub fn new(lengthscale: f64, nu: f64, lambda: f64) -> Result<Self> {
        Self::with_capacity(lengthscale, nu, lambda, DEFAULT_CAPACITY)
    }

    pub fn with_capacity(lengthscale: f64, nu: f64, lambda: f64, capacity: usize) -> Result<Self> {
        if !(lengthscale.is_finite() && lengthscale > 0.0) {
            return Err(BanditError::InvalidConfig(format!(
                "lengthscale must be > 0, got {lengthscale}"
            )));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(BanditError::InvalidConfig(format!("lambda must be > 0, got {lambda}")));
        }
        if !(nu.is_finite() && nu >= 0.0) {
            return Err(BanditError::InvalidConfig(format!("nu must be >= 0, got {nu}")));
        }
        Ok(Self {
            contexts: Vec::new(),
            rewards: Vec::new(),
            chol: Vec::new(),
            weights: Vec::new(),
            capacity,
            lengthscale,
            nu,
            lambda,
        })
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn contexts(&self) -> &[Vec<f64>] {
        &self.contexts
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (-sq / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if let Some(first) = self.contexts.first() {
            if first.len() != x.len() {
                return Err(BanditError::DimensionMismatch {
                    expected: first.len(),
                    got: x.len(),
                });
            }
        }
        Ok(())
    }

    // Solves L v = rhs.
    fn forward_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(rhs.len());
        for (i, row) in self.chol.iter().enumerate() {
            let s = rhs[i] - dot(&row[..i], &v);
            v.push(s / row[i]);
        }
        v
    }

    // Solves Lᵀ w = rhs.
    fn backward_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut w = rhs.to_vec();
        for i in (0..n).rev() {
            w[i] /= self.chol[i][i];
            let wi = w[i];
            for (wj, lij) in w[..i].iter_mut().zip(&self.chol[i][..i]) {
                *wj -= lij * wi;
            }
        }
        w
    }

    /// Posterior mean and variance at `x`.
    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check(x)?;
        let kxx = self.kernel(x, x);
        if self.contexts.is_empty() {
            return Ok((0.0, kxx));
        }
        let k: Vec<f64> = self.contexts.iter().map(|c| self.kernel(c, x)).collect();
        let mean = dot(&k, &self.weights);
        let v = self.forward_solve(&k);
        Ok((mean, (kxx - dot(&v, &v)).max(0.0)))
    }

    pub fn scores(&self, round: &RoundContext) -> Result<Vec<f64>> {
        round
            .arms
            .iter()
            .map(|arm| {
                let (mean, var) = self.posterior(arm.as_slice())?;
                Ok(mean + self.nu * var.sqrt())
            })
            .collect()
    }

    pub fn select(&self, round: &RoundContext) -> Result<usize> {
        Ok(argmax(&self.scores(round)?))
    }

    /// Stores `(x, r)` while below capacity; a no-op afterwards.
    pub fn update(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.check(x)?;
        if !reward.is_finite() {
            return Err(BanditError::NonFinite("reward"));
        }
        if self.contexts.len() >= self.capacity {
            return Ok(());
        }
        let k: Vec<f64> = self.contexts.iter().map(|c| self.kernel(c, x)).collect();
        let mut row = self.forward_solve(&k);
        // Schur complement of K + λI is at least λ.
        let schur = (self.kernel(x, x) + self.lambda - dot(&row, &row)).max(self.lambda);
        row.push(schur.sqrt());
        self.chol.push(row);
        self.contexts.push(x.to_vec());
        self.rewards.push(reward);
        let z = self.forward_solve(&self.rewards);
        self.weights = self.backward_solve(&z);
        Ok(())
    }
}
