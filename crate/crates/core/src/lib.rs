//! Contextual-bandit laboratory.
//!
//! - [`nn`]: bias-free dense ReLU networks with exact gradients and SGD.
//! - [`env`]: seedable environments, classification-to-bandit adapter, regret.
//! - [`eenet`]: the exploitation/exploration network policy.
//! - [`baselines`]: LinUCB, KernelUCB, Neural-Epsilon, NeuralUCB, NeuralTS.
//! - [`harness`]: the online loop, summaries, grid search and CSV outputs.

pub mod baselines;
pub mod config;
pub mod eenet;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod policy;
pub mod rng;

pub use error::{BanditError, Result};
