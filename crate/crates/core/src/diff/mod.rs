//! Parameter vectors, MLPs, policy densities, advantage estimation and Fisher solves.

mod batch;
mod fisher;
mod gaussian;
pub mod gradcheck;
mod kl;
mod mlp;
mod optim;
mod params;
mod policy;
mod softmax;

pub use batch::{
    discounted_returns, discounted_to_go, gae_advantages, gae_advantages_bootstrapped, EpisodeSummary,
    TrajectoryBatch, Transition,
};
pub use fisher::{conjugate_gradient, fisher_system_solve, CgSolve, EmpiricalFisher};
pub use gaussian::{gaussian_logprob, GaussianDist, GaussianPolicy, LogVarMode, LOG_VAR_MAX, LOG_VAR_MIN};
pub use kl::{kl_categorical, kl_diag_gaussian};
pub use mlp::{mlp_backward, mlp_forward, Activation, MlpGradients, MlpSpec, MlpTape, OutputHead};
pub use optim::{soft_update, Adam};
pub use params::{axpy, dot, norm, ParamLayout, ParamVector, Segment, CHECKPOINT_VERSION};
pub use policy::StochasticPolicy;
pub use softmax::SoftmaxPolicy;
