//! Dense ReLU networks without bias terms.
//!
//! `f(x) = W_L σ(W_{L-1} σ(… σ(W_1 x)))` with `σ = max(0, ·)`. `W_1` is `m × d`,
//! hidden layers are `m × m` and the output layer is `1 × m`. Gradients are
//! exact backpropagation with the subgradient of ReLU taken as 0 at 0.
//!
//! Parameters flatten layer-major, each matrix row-major; `ParamVector`
//! indices are stable identifiers for a given architecture.

use rand_distr::{Distribution, Normal};

use crate::error::{BanditError, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub width: usize,
    pub depth: usize,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(input_dim: usize, width: usize, depth: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || width == 0 {
            return Err(BanditError::InvalidConfig(
                "network input_dim and width must be >= 1".into(),
            ));
        }
        if depth < 2 {
            return Err(BanditError::InvalidConfig("network depth must be >= 2".into()));
        }
        Ok(Self {
            input_dim,
            width,
            depth,
            seed,
        })
    }

    /// `m·d + (L−2)·m² + m`.
    pub fn param_count(&self) -> usize {
        let m = self.width;
        m * self.input_dim + (self.depth - 2) * m * m + m
    }

    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.depth);
        shapes.push((self.width, self.input_dim));
        for _ in 2..self.depth {
            shapes.push((self.width, self.width));
        }
        shapes.push((1, self.width));
        shapes
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(BanditError::InvalidConfig("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(BanditError::DimensionMismatch {
                    expected: cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Flat parameter-space vector (weights or gradients).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.0.iter_mut().for_each(|v| *v *= factor);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Matrix>,
    config: MlpConfig,
}

impl Mlp {
    /// Hidden layers draw from `N(0, 2/m)`, the output layer from `N(0, 1/m)`.
    pub fn init(config: MlpConfig) -> Self {
        let mut rng = rng::stream(config.seed, &[]);
        let m = config.width as f64;
        let hidden = Normal::new(0.0, (2.0 / m).sqrt()).expect("finite std");
        let output = Normal::new(0.0, (1.0 / m).sqrt()).expect("finite std");
        let shapes = config.layer_shapes();
        let last = shapes.len() - 1;
        let layers = shapes
            .into_iter()
            .enumerate()
            .map(|(l, (rows, cols))| {
                let dist = if l == last { &output } else { &hidden };
                let data = (0..rows * cols).map(|_| dist.sample(&mut rng)).collect();
                Matrix { rows, cols, data }
            })
            .collect();
        Self { layers, config }
    }

    /// Builds a network from explicit weight matrices. The config seed is 0.
    pub fn from_layers(layers: Vec<Matrix>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(BanditError::InvalidConfig("network depth must be >= 2".into()));
        }
        let config = MlpConfig::new(layers[0].cols, layers[0].rows, layers.len(), 0)?;
        for (layer, (rows, cols)) in layers.iter().zip(config.layer_shapes()) {
            if layer.rows != rows {
                return Err(BanditError::DimensionMismatch {
                    expected: rows,
                    got: layer.rows,
                });
            }
            if layer.cols != cols {
                return Err(BanditError::DimensionMismatch {
                    expected: cols,
                    got: layer.cols,
                });
            }
        }
        if layers.iter().any(|l| l.data.iter().any(|v| !v.is_finite())) {
            return Err(BanditError::NonFinite("network weights"));
        }
        Ok(Self { layers, config })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn param_count(&self) -> usize {
        self.config.param_count()
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    /// Direct weight access, mainly for tests that pin a configuration.
    pub fn layers_mut(&mut self) -> &mut [Matrix] {
        &mut self.layers
    }

    pub fn params(&self) -> ParamVector {
        ParamVector(
            self.layers
                .iter()
                .flat_map(|l| l.data.iter().copied())
                .collect(),
        )
    }

    pub fn set_params(&mut self, params: &ParamVector) -> Result<()> {
        self.check_param_len(params)?;
        if params.0.iter().any(|v| !v.is_finite()) {
            return Err(BanditError::NonFinite("network weights"));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let n = layer.data.len();
            layer.data.copy_from_slice(&params.0[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(BanditError::DimensionMismatch {
                expected: self.config.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_param_len(&self, v: &ParamVector) -> Result<()> {
        if v.len() != self.param_count() {
            return Err(BanditError::DimensionMismatch {
                expected: self.param_count(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Pre-activations of every hidden layer (`L − 1` vectors of length `m`).
    pub fn hidden_pre_activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        Ok(self.trace(x).0)
    }

    // (pre-activations, post-activations) of the hidden layers.
    fn trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let hidden = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(hidden);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(hidden);
        for layer in &self.layers[..hidden] {
            let input = post.last().map_or(x, Vec::as_slice);
            let z = layer.mul_vec(input);
            let h = z.iter().map(|&v| v.max(0.0)).collect();
            pre.push(z);
            post.push(h);
        }
        (pre, post)
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let (_, post) = self.trace(x);
        let last = post.last().expect("depth >= 2");
        Ok(dot(self.layers[self.layers.len() - 1].row(0), last))
    }

    pub fn grad_params(&self, x: &[f64]) -> Result<ParamVector> {
        self.forward_with_grad(x).map(|(_, g)| g)
    }

    /// Output and parameter gradient from a single forward/backward pass.
    pub fn forward_with_grad(&self, x: &[f64]) -> Result<(f64, ParamVector)> {
        self.check_input(x)?;
        let (pre, post) = self.trace(x);
        let depth = self.layers.len();
        let out_layer = &self.layers[depth - 1];
        let output = dot(out_layer.row(0), &post[depth - 2]);

        let mut grad = vec![0.0; self.param_count()];
        let mut offsets = Vec::with_capacity(depth);
        let mut acc = 0;
        for layer in &self.layers {
            offsets.push(acc);
            acc += layer.data.len();
        }

        // Output layer: d f / d W_L = h_{L-1}.
        grad[offsets[depth - 1]..].copy_from_slice(&post[depth - 2]);

        // delta for hidden layer L-1.
        let mut delta: Vec<f64> = out_layer
            .row(0)
            .iter()
            .zip(&pre[depth - 2])
            .map(|(&w, &z)| if z > 0.0 { w } else { 0.0 })
            .collect();

        for l in (0..depth - 1).rev() {
            let input = if l == 0 { x } else { post[l - 1].as_slice() };
            let layer = &self.layers[l];
            let block = &mut grad[offsets[l]..offsets[l] + layer.data.len()];
            for (r, &dr) in delta.iter().enumerate() {
                if dr == 0.0 {
                    continue;
                }
                let row = &mut block[r * layer.cols..(r + 1) * layer.cols];
                for (g, &xi) in row.iter_mut().zip(input) {
                    *g = dr * xi;
                }
            }
            if l > 0 {
                let mut next = vec![0.0; layer.cols];
                for (r, &dr) in delta.iter().enumerate() {
                    if dr == 0.0 {
                        continue;
                    }
                    for (n, &w) in next.iter_mut().zip(layer.row(r)) {
                        *n += w * dr;
                    }
                }
                for (n, &z) in next.iter_mut().zip(&pre[l - 1]) {
                    if z <= 0.0 {
                        *n = 0.0;
                    }
                }
                delta = next;
            }
        }
        Ok((output, ParamVector(grad)))
    }

    /// `θ ← θ − lr · grad`, in place.
    pub fn sgd_step(&mut self, loss_grad: &ParamVector, lr: f64) -> Result<()> {
        self.check_param_len(loss_grad)?;
        if !lr.is_finite() || lr < 0.0 {
            return Err(BanditError::InvalidConfig(format!(
                "learning rate must be finite and >= 0, got {lr}"
            )));
        }
        if loss_grad.0.iter().any(|g| !g.is_finite()) {
            return Err(BanditError::NonFinite("gradient"));
        }
        if lr == 0.0 {
            return Ok(());
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let n = layer.data.len();
            for (w, g) in layer.data.iter_mut().zip(&loss_grad.0[offset..offset + n]) {
                *w -= lr * g;
            }
            offset += n;
        }
        if self.layers.iter().any(|l| l.data.iter().any(|v| !v.is_finite())) {
            return Err(BanditError::NonFinite("network weights after SGD step"));
        }
        Ok(())
    }

    /// One SGD step on `½(f(x) − target)²`. Returns the pre-step prediction.
    pub fn train_step(&mut self, x: &[f64], target: f64, lr: f64) -> Result<f64> {
        if !target.is_finite() {
            return Err(BanditError::NonFinite("training target"));
        }
        let (pred, grad) = self.forward_with_grad(x)?;
        let scale = squared_loss_grad(pred, target);
        self.sgd_step(&grad.scaled(scale), lr)?;
        Ok(pred)
    }
}

/// Derivative of `½(pred − target)²` with respect to `pred`.
pub fn squared_loss_grad(pred: f64, target: f64) -> f64 {
    pred - target
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn tiny() -> Mlp {
        Mlp::from_layers(vec![
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap(),
        ])
        .unwrap()
    }

    fn random_input(d: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, &[99]);
        (0..d).map(|_| r.random_range(-1.0..1.0)).collect()
    }

    // Straight-line evaluation of the network formula, independent of `trace`.
    fn oracle_forward(net: &Mlp, x: &[f64]) -> f64 {
        let mut h = x.to_vec();
        let layers = net.layers();
        for (l, w) in layers.iter().enumerate() {
            let mut out = Vec::new();
            for r in 0..w.rows() {
                let mut s = 0.0;
                for c in 0..w.cols() {
                    s += w.get(r, c) * h[c];
                }
                out.push(if l + 1 < layers.len() { s.max(0.0) } else { s });
            }
            h = out;
        }
        h[0]
    }

    #[test]
    fn config_validation() {
        assert!(MlpConfig::new(0, 3, 2, 0).is_err());
        assert!(MlpConfig::new(3, 0, 2, 0).is_err());
        assert!(MlpConfig::new(3, 3, 1, 0).is_err());
        assert_eq!(MlpConfig::new(10, 100, 3, 0).unwrap().param_count(), 1000 + 10_000 + 100);
    }

    #[test]
    fn init_shapes() {
        let net = Mlp::init(MlpConfig::new(4, 3, 2, 1).unwrap());
        assert_eq!((net.layers()[0].rows(), net.layers()[0].cols()), (3, 4));
        assert_eq!((net.layers()[1].rows(), net.layers()[1].cols()), (1, 3));
        assert_eq!(net.param_count(), 15);
        assert_eq!(net.params().len(), 15);
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = MlpConfig::new(5, 7, 3, 42).unwrap();
        assert_eq!(Mlp::init(cfg), Mlp::init(cfg));
        let other = Mlp::init(MlpConfig::new(5, 7, 3, 43).unwrap());
        assert_ne!(Mlp::init(cfg), other);
    }

    #[test]
    fn init_variances() {
        let m = 256usize;
        let net = Mlp::init(MlpConfig::new(8, m, 3, 5).unwrap());
        let var = |s: &[f64]| {
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        };
        let w1 = var(net.layers()[0].as_slice());
        let wl = var(net.layers()[2].as_slice());
        let m = m as f64;
        assert!((1.8 / m..=2.2 / m).contains(&w1), "W1 variance {w1}");
        assert!((0.9 / m..=1.1 / m).contains(&wl), "WL variance {wl}");
    }

    #[test]
    fn forward_zero_input() {
        let net = Mlp::init(MlpConfig::new(6, 9, 3, 3).unwrap());
        assert_eq!(net.forward(&[0.0; 6]).unwrap(), 0.0);
    }

    #[test]
    fn forward_hand_example() {
        assert_eq!(tiny().forward(&[1.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn forward_matches_oracle() {
        for seed in 0..20 {
            let net = Mlp::init(MlpConfig::new(7, 13, 2, seed).unwrap());
            let x = random_input(7, seed);
            let got = net.forward(&x).unwrap();
            let want = oracle_forward(&net, &x);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300), "{got} vs {want}");
        }
    }

    #[test]
    fn forward_dimension_mismatch() {
        assert!(matches!(
            tiny().forward(&[1.0]),
            Err(BanditError::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(tiny().grad_params(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn grad_zero_input() {
        let net = Mlp::init(MlpConfig::new(4, 5, 3, 9).unwrap());
        assert!(net.grad_params(&[0.0; 4]).unwrap().0.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn grad_last_layer_is_hidden_vector() {
        let g = tiny().grad_params(&[1.0, -1.0]).unwrap();
        // W1 block: delta = (1·1, 0) so row 0 = x, row 1 = 0.
        assert_eq!(&g.0[..4], &[1.0, -1.0, 0.0, 0.0]);
        assert_eq!(&g.0[4..], &[1.0, 0.0]);
    }

    #[test]
    fn grad_matches_finite_differences() {
        let net = Mlp::init(MlpConfig::new(6, 8, 3, 17).unwrap());
        let x = random_input(6, 17);
        let g = net.grad_params(&x).unwrap();
        let base = net.params();
        let mut probe = net.clone();
        let mut r = rng::stream(1, &[]);
        let h = 1e-5;
        for _ in 0..20 {
            let j = r.random_range(0..base.len());
            let mut p = base.clone();
            p.0[j] += h;
            probe.set_params(&p).unwrap();
            let up = probe.forward(&x).unwrap();
            p.0[j] -= 2.0 * h;
            probe.set_params(&p).unwrap();
            let down = probe.forward(&x).unwrap();
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - g.0[j]).abs() / fd.abs().max(g.0[j].abs()).max(1e-6);
            assert!(rel < 1e-4, "coordinate {j}: fd {fd} analytic {}", g.0[j]);
        }
    }

    #[test]
    fn sgd_examples() {
        let mut net = tiny();
        let before = net.clone();
        net.sgd_step(&ParamVector::zeros(6), 0.5).unwrap();
        assert_eq!(net, before);
        net.sgd_step(&ParamVector(vec![1.0; 6]), 0.0).unwrap();
        assert_eq!(net, before);

        let mut g = ParamVector::zeros(6);
        g.0[0] = 2.0;
        net.sgd_step(&g, 0.1).unwrap();
        assert!((net.layers()[0].get(0, 0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sgd_rejects_bad_input() {
        let mut net = tiny();
        let mut g = ParamVector::zeros(6);
        g.0[3] = f64::NAN;
        assert!(matches!(net.sgd_step(&g, 0.1), Err(BanditError::NonFinite(_))));
        assert!(net.sgd_step(&ParamVector::zeros(5), 0.1).is_err());
        assert_eq!(net, tiny());
    }

    #[test]
    fn squared_loss_examples() {
        assert_eq!(squared_loss_grad(0.7, 0.7), 0.0);
        assert_eq!(squared_loss_grad(1.0, 0.0), 1.0);
        assert!((squared_loss_grad(0.2, 0.9) + 0.7).abs() < 1e-15);
    }

    #[test]
    fn train_step_reduces_loss() {
        let mut net = Mlp::init(MlpConfig::new(4, 32, 2, 2).unwrap());
        let x = [0.5, 0.5, 0.5, 0.5];
        let before = (net.forward(&x).unwrap() - 1.0).powi(2);
        net.train_step(&x, 1.0, 0.01).unwrap();
        let after = (net.forward(&x).unwrap() - 1.0).powi(2);
        assert!(after < before);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn last_layer_linearity(seed in 0u64..1000, depth in 2usize..4) {
            let mut net = Mlp::init(MlpConfig::new(5, 11, depth, seed).unwrap());
            let x = random_input(5, seed);
            let y = net.forward(&x).unwrap();
            let last = net.layers().len() - 1;
            net.layers_mut()[last].as_mut_slice().iter_mut().for_each(|w| *w *= 2.0);
            prop_assert_eq!(net.forward(&x).unwrap(), 2.0 * y);
        }

        #[test]
        fn positive_homogeneity(seed in 0u64..1000, c in 0.01f64..100.0) {
            let net = Mlp::init(MlpConfig::new(5, 11, 3, seed).unwrap());
            let x = random_input(5, seed);
            let cx: Vec<f64> = x.iter().map(|v| v * c).collect();
            let y = net.forward(&x).unwrap();
            let cy = net.forward(&cx).unwrap();
            prop_assert!((cy - c * y).abs() <= 1e-12 * (c * y).abs().max(1e-12));
        }

        #[test]
        fn forward_and_grad_are_reproducible(seed in 0u64..1000) {
            let cfg = MlpConfig::new(3, 6, 3, seed).unwrap();
            let x = random_input(3, seed);
            let a = Mlp::init(cfg).forward_with_grad(&x).unwrap();
            let b = Mlp::init(cfg).forward_with_grad(&x).unwrap();
            prop_assert_eq!(a.0.to_bits(), b.0.to_bits());
            prop_assert_eq!(a.1, b.1);
        }
    }
}
