//! Comparison policies: LinUCB, KernelUCB and the neural baselines
//! (Neural-Epsilon, NeuralUCB, NeuralTS) sharing the exploitation network.

pub mod kernelucb;
pub mod linucb;
pub mod neural;

pub use kernelucb::KernelState;
pub use linucb::RidgeState;
pub use neural::{
    neural_epsilon_select, neuralts_samples, neuralts_select, neuralucb_select, DiagCovariance, NeuralExploration, NeuralPolicy,
};
