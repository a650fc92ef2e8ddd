//! Lyapunov-based safe policy optimization for constrained MDPs.
//!
//! The crate is organised bottom-up:
//!
//! - [`cmdp`]: exact tabular CMDP machinery (Bellman operators, policy
//!   evaluation, occupancy LP, Lyapunov functions, safe policy iteration).
//! - [`diff`]: a small double-precision differentiable stack (MLPs, Gaussian
//!   and softmax policies, KL, GAE, Fisher solves).
//! - [`envs`]: point-mass Circle/Gather environments and a tabular adapter.
//! - [`safepg`]: DDPG/PPO baselines, Lagrangian methods, θ-projection and the
//!   action-projection safety layer.

pub mod cmdp;
pub mod diff;
pub mod envs;
mod error;
pub mod safepg;

pub use error::{Error, Result};
