//! Safe policy-gradient learners built on Lyapunov projections.

mod config;
mod ddpg;
mod lagrange;
mod nets;
mod ppo;
mod projection;
mod replay;
mod safeguard;

pub use config::{SafePgConfig, Variant};
pub use ddpg::{a_projection_actor_grad, a_projection_objective, deterministic_pg, DdpgAgent, DdpgStepInfo};
pub use lagrange::{
    lagrangian_ac_update, lagrangian_pg_gradient, lagrangian_pg_update, AcFlavor, AcState, LagrangeState,
    LagrangianPgInfo, LinearCritic, OnlineTransition,
};
pub use nets::{Critic, DeterministicActor};
pub use ppo::{
    adapt_beta, batch_mean_kl, discounted_score_gradient, fit_value_head, linearized_constraint, ppo_update,
    sppo_theta_update, PpoAgent, PpoIterInfo, PpoStep, ProjectedGaussian, SppoStep,
};
pub use projection::{
    projection_vjp, safety_layer_project, safety_layer_project_gaussian, theta_projection_multiplier,
    ProjectionResult, ThetaMultiplier, DEGENERATE_NORM,
};
pub use replay::{ReplayBuffer, ReplayItem};
pub use safeguard::{safeguard_triggered, safeguard_update, tighten_threshold};
