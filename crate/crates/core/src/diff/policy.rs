use rand::RngCore;

use crate::error::Result;

/// Common interface of the stochastic policies used by the on-policy learners.
///
/// Actions are plain vectors; a discrete action is stored as its index in `action[0]`.
pub trait StochasticPolicy {
    fn n_params(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn log_prob(&self, params: &[f64], obs: &[f64], action: &[f64]) -> Result<f64>;
    /// Adds `scale * ∇θ log π(action | obs)` into `grad`; returns the log-probability.
    fn log_prob_grad(&self, params: &[f64], obs: &[f64], action: &[f64], scale: f64, grad: &mut [f64]) -> Result<f64>;
    fn sample(&self, params: &[f64], obs: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>>;
    /// Noise-free action used for evaluation.
    fn mode(&self, params: &[f64], obs: &[f64]) -> Result<Vec<f64>>;
    /// `KL(π_old(·|obs) ‖ π_new(·|obs))`.
    fn kl(&self, old: &[f64], new: &[f64], obs: &[f64]) -> Result<f64>;
}
