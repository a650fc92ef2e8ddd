//! Exact machinery for finite constrained MDPs.

mod eval;
mod lp;
mod lyapunov;
mod model;
mod simplex;
mod spi;

pub use eval::{
    bellman_apply, discounted_visitation, evaluate_cost, policy_evaluate, policy_transition, q_values,
    softmax_policy_gradient, state_occupancy, Signal,
};
pub use lp::{lp_optimal_cmdp, CmdpOptimum};
pub use lyapunov::{
    auxiliary_budget_usage, constraint_budget, epsilon_constant, epsilon_star_bound, epsilon_state_dependent,
    lyapunov_bundle, LyapunovBundle, FEASIBILITY_TOL,
};
pub use model::{TabularCmdp, TabularPolicy};
pub use simplex::{solve_standard_form, LpSolution};
pub use spi::{
    optimal_deterministic_policy, solve_state_lp, spi_run, spi_run_with, spi_step, spi_step_with, EpsilonRule,
    SpiIterate, SpiOutcome,
};
