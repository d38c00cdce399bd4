//! LinUCB with a shared ridge model over arm contexts.
//!
//! `score(x) = xᵀθ̂ + α·√(xᵀA⁻¹x)` with `A = λI + Σ xxᵀ`, `b = Σ r·x`,
//! `θ̂ = A⁻¹b`. `A⁻¹` is maintained by Sherman–Morrison rank-1 updates.

use crate::env::RoundContext;
use crate::error::{BanditError, Result};
use crate::nn::dot;
use crate::policy::argmax;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeState {
    dim: usize,
    /// Row-major `d × d`.
    a: Vec<f64>,
    a_inv: Vec<f64>,
    b: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
}

impl RidgeState {
    pub fn new(dim: usize, alpha: f64, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(BanditError::InvalidConfig("LinUCB dimension must be >= 1".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(BanditError::InvalidConfig(format!("lambda must be > 0, got {lambda}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(BanditError::InvalidConfig(format!("alpha must be >= 0, got {alpha}")));
        }
        let mut a = vec![0.0; dim * dim];
        let mut a_inv = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = lambda;
            a_inv[i * dim + i] = 1.0 / lambda;
        }
        Ok(Self {
            dim,
            a,
            a_inv,
            b: vec![0.0; dim],
            alpha,
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn trace_a(&self) -> f64 {
        (0..self.dim).map(|i| self.a[i * self.dim + i]).sum()
    }

    fn a_inv_mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|r| dot(&self.a_inv[r * self.dim..(r + 1) * self.dim], x))
            .collect()
    }

    pub fn theta_hat(&self) -> Vec<f64> {
        self.a_inv_mul(&self.b)
    }

    pub fn scores(&self, round: &RoundContext) -> Result<Vec<f64>> {
        let theta = self.theta_hat();
        round
            .arms
            .iter()
            .map(|arm| {
                let x = arm.as_slice();
                self.check(x)?;
                let width = dot(x, &self.a_inv_mul(x)).max(0.0).sqrt();
                Ok(dot(x, &theta) + self.alpha * width)
            })
            .collect()
    }

    pub fn select(&self, round: &RoundContext) -> Result<usize> {
        Ok(argmax(&self.scores(round)?))
    }

    pub fn update(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.check(x)?;
        if !reward.is_finite() {
            return Err(BanditError::NonFinite("reward"));
        }
        let d = self.dim;
        for r in 0..d {
            for c in 0..d {
                self.a[r * d + c] += x[r] * x[c];
            }
        }
        for (bi, xi) in self.b.iter_mut().zip(x) {
            *bi += reward * xi;
        }
        let u = self.a_inv_mul(x);
        let denom = 1.0 + dot(x, &u);
        for r in 0..d {
            for c in 0..d {
                self.a_inv[r * d + c] -= u[r] * u[c] / denom;
            }
        }
        Ok(())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(BanditError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ArmContext, EnvSpec, Noise, RewardModel};

    // Gauss-Jordan inverse with partial pivoting.
    fn invert(mut m: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        let n = m.len();
        let mut inv: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                .unwrap();
            m.swap(col, piv);
            inv.swap(col, piv);
            let p = m[col][col];
            for j in 0..n {
                m[col][j] /= p;
                inv[col][j] /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = m[r][col];
                    for j in 0..n {
                        m[r][j] -= f * m[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
        inv
    }

    #[test]
    fn fresh_state_scores_equal_alpha() {
        let env = EnvSpec::synthetic(RewardModel::Linear, 4, 5, Noise::None, 1).unwrap();
        let state = RidgeState::new(4, 0.7, 1.0).unwrap();
        let round = env.next_round(1);
        for s in state.scores(&round).unwrap() {
            assert!((s - 0.7).abs() < 1e-12);
        }
        assert_eq!(state.select(&round).unwrap(), 0);
    }

    #[test]
    fn hand_update() {
        let mut state = RidgeState::new(3, 1.0, 1.0).unwrap();
        state.update(&[1.0, 0.0, 0.0], 1.0).unwrap();
        assert_eq!(state.a(), &[2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(state.b(), &[1.0, 0.0, 0.0]);
        let theta = state.theta_hat();
        assert!((theta[0] - 0.5).abs() < 1e-15 && theta[1] == 0.0 && theta[2] == 0.0);
        state.update(&[0.0, 1.0, 0.0], 0.0).unwrap();
        assert_eq!(state.b(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn trace_grows_by_one_per_unit_update() {
        let env = EnvSpec::synthetic(RewardModel::Linear, 5, 3, Noise::None, 2).unwrap();
        let mut state = RidgeState::new(5, 1.0, 0.5).unwrap();
        for t in 1..=20 {
            state.update(env.next_round(t).arms[0].as_slice(), 0.3).unwrap();
            assert!((state.trace_a() - (0.5 * 5.0 + t as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn alpha_zero_is_greedy_on_estimate() {
        let env = EnvSpec::synthetic(RewardModel::Linear, 3, 6, Noise::None, 3).unwrap();
        let mut state = RidgeState::new(3, 0.0, 1.0).unwrap();
        for t in 1..=10 {
            let r = env.next_round(t);
            state.update(r.arms[0].as_slice(), r.expected_rewards[0]).unwrap();
        }
        let round = env.next_round(11);
        let theta = state.theta_hat();
        let greedy: Vec<f64> = round.arms.iter().map(|a| dot(a.as_slice(), &theta)).collect();
        assert_eq!(state.select(&round).unwrap(), argmax(&greedy));
    }

    #[test]
    fn matches_normal_equations_after_updates() {
        let env = EnvSpec::synthetic(RewardModel::Quadratic, 3, 4, Noise::Gaussian(0.1), 4).unwrap();
        let mut state = RidgeState::new(3, 0.9, 1.0).unwrap();
        let mut history: Vec<(Vec<f64>, f64)> = Vec::new();
        for t in 1..=5 {
            let r = env.next_round(t);
            let x = r.arms[t % 4].as_slice().to_vec();
            let reward = env.realize(&r, t % 4).unwrap();
            state.update(&x, reward).unwrap();
            history.push((x, reward));
        }
        let mut a = vec![vec![0.0; 3]; 3];
        let mut b = [0.0; 3];
        for i in 0..3 {
            a[i][i] = 1.0;
        }
        for (x, r) in &history {
            for i in 0..3 {
                b[i] += r * x[i];
                for j in 0..3 {
                    a[i][j] += x[i] * x[j];
                }
            }
        }
        let inv = invert(a);
        let theta: Vec<f64> = (0..3).map(|i| dot(&inv[i], &b)).collect();
        for (got, want) in state.theta_hat().iter().zip(&theta) {
            assert!((got - want).abs() < 1e-8);
        }
        let round = env.next_round(6);
        for (arm, got) in round.arms.iter().zip(state.scores(&round).unwrap()) {
            let x = arm.as_slice();
            let ax: Vec<f64> = (0..3).map(|i| dot(&inv[i], x)).collect();
            let want = dot(x, &theta) + 0.9 * dot(x, &ax).sqrt();
            assert!((got - want).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(RidgeState::new(0, 1.0, 1.0).is_err());
        assert!(RidgeState::new(2, 1.0, 0.0).is_err());
        assert!(RidgeState::new(2, -1.0, 1.0).is_err());
        let mut s = RidgeState::new(2, 1.0, 1.0).unwrap();
        assert!(s.update(&[1.0], 0.0).is_err());
        let round = RoundContext::new(vec![ArmContext(vec![1.0, 0.0, 0.0])], vec![0.0], 1).unwrap();
        assert!(s.select(&round).is_err());
    }
}
