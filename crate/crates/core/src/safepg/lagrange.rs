use serde::{Deserialize, Serialize};

use crate::cmdp::Signal;
use crate::diff::{axpy, discounted_returns, dot, StochasticPolicy, TrajectoryBatch};
use crate::error::{check_dim, Error, Result};

/// Multiplier with its projection bound and the three step sizes
/// (`alpha1` for λ, `alpha2` for the actor, `alpha3` for the critic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeState {
    pub lambda: f64,
    pub lambda_max: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl LagrangeState {
    pub fn new(lambda: f64, lambda_max: f64, alpha1: f64, alpha2: f64, alpha3: f64) -> Result<Self> {
        if !(lambda_max >= 0.0 && (0.0..=lambda_max).contains(&lambda)) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, {lambda_max}]")));
        }
        Ok(Self {
            lambda,
            lambda_max,
            alpha1,
            alpha2,
            alpha3,
        })
    }

    /// `λ ← clip(λ + α1 (mean_d − d0), 0, λ_max)`.
    pub fn dual_step(&mut self, mean_d: f64, d0: f64) {
        let next = self.lambda + self.alpha1 * (mean_d - d0);
        self.lambda = next.clamp(0.0, self.lambda_max);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianPgInfo {
    /// `(1/N) Σ_ξ ∇ log P_θ(ξ) (C(ξ) + λ D(ξ))` at the pre-update parameters.
    pub gradient: Vec<f64>,
    pub mean_cost_return: f64,
    pub mean_constraint_return: f64,
    /// λ used for the θ step (before the dual step).
    pub lambda_used: f64,
}

/// Trajectory-likelihood-ratio gradient of `C + λ D` with discounted returns.
pub fn lagrangian_pg_gradient(
    policy: &dyn StochasticPolicy,
    params: &[f64],
    batch: &TrajectoryBatch,
    lambda: f64,
    gamma: f64,
) -> Result<(Vec<f64>, f64, f64)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch("lagrangian policy gradient"));
    }
    let c = discounted_returns(batch, Signal::Cost, gamma);
    let d = discounted_returns(batch, Signal::Constraint, gamma);
    let n = batch.n_episodes() as f64;
    let mut grad = vec![0.0; policy.n_params()];
    for (e, ep) in batch.episodes().iter().enumerate() {
        let w = (c[e] + lambda * d[e]) / n;
        for t in ep.range() {
            let s = &batch.steps()[t];
            policy.log_prob_grad(params, &s.obs, &s.action, w, &mut grad)?;
        }
    }
    Ok((grad, c.iter().sum::<f64>() / n, d.iter().sum::<f64>() / n))
}

/// One iteration of the trajectory-based Lagrangian policy gradient:
/// θ descends along the gradient of `C + λD` with rate `alpha2`, then λ
/// ascends along `mean D(ξ) − d0` with rate `alpha1` and is clipped to `[0, λ_max]`.
pub fn lagrangian_pg_update(
    policy: &dyn StochasticPolicy,
    params: &mut [f64],
    batch: &TrajectoryBatch,
    lagrange: &mut LagrangeState,
    d0: f64,
    gamma: f64,
) -> Result<LagrangianPgInfo> {
    let lambda_used = lagrange.lambda;
    let (gradient, mc, md) = lagrangian_pg_gradient(policy, params, batch, lambda_used, gamma)?;
    axpy(params, -lagrange.alpha2, &gradient);
    lagrange.dual_step(md, d0);
    Ok(LagrangianPgInfo {
        gradient,
        mean_cost_return: mc,
        mean_constraint_return: md,
        lambda_used,
    })
}

/// Linear state-value critic `V(x) = vᵀψ(x)` with `ψ` the observation itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCritic {
    pub v: Vec<f64>,
}

impl LinearCritic {
    pub fn zeros(n: usize) -> Self {
        Self { v: vec![0.0; n] }
    }

    pub fn value(&self, features: &[f64]) -> f64 {
        dot(&self.v, features)
    }
}

/// Online transition `(x, a, c, d, x', terminal)`.
#[derive(Debug, Clone, Copy)]
pub struct OnlineTransition<'a> {
    pub obs: &'a [f64],
    pub action: &'a [f64],
    pub cost: f64,
    pub constraint_cost: f64,
    pub next_obs: &'a [f64],
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcFlavor {
    Vanilla,
    /// Natural actor-critic with compatible-feature weights `w`.
    Natural,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcState {
    pub critic: LinearCritic,
    /// Natural-gradient estimate (NAC only).
    pub w: Vec<f64>,
    pub flavor: AcFlavor,
}

impl AcState {
    pub fn new(n_features: usize, n_params: usize, flavor: AcFlavor) -> Self {
        Self {
            critic: LinearCritic::zeros(n_features),
            w: vec![0.0; n_params],
            flavor,
        }
    }
}

/// One incremental Lagrangian actor-critic step on the augmented cost `c + λd`.
/// Returns the TD error. λ itself moves with [`LagrangeState::dual_step`] on
/// the slower, episode-level schedule.
pub fn lagrangian_ac_update(
    policy: &dyn StochasticPolicy,
    params: &mut [f64],
    ac: &mut AcState,
    tr: OnlineTransition<'_>,
    lagrange: &LagrangeState,
    gamma: f64,
) -> Result<f64> {
    check_dim("critic features", ac.critic.v.len(), tr.obs.len())?;
    let next_v = if tr.terminal { 0.0 } else { ac.critic.value(tr.next_obs) };
    let delta = tr.cost + lagrange.lambda * tr.constraint_cost + gamma * next_v - ac.critic.value(tr.obs);
    if delta == 0.0 && ac.flavor == AcFlavor::Vanilla {
        return Ok(0.0);
    }
    let mut score = vec![0.0; policy.n_params()];
    policy.log_prob_grad(params, tr.obs, tr.action, 1.0, &mut score)?;
    axpy(&mut ac.critic.v, lagrange.alpha3 * delta, tr.obs);
    match ac.flavor {
        AcFlavor::Vanilla => axpy(params, -lagrange.alpha2 * delta / (1.0 - gamma), &score),
        AcFlavor::Natural => {
            // w ← (I − α3 s sᵀ) w + α3 δ s
            let sw = dot(&score, &ac.w);
            axpy(&mut ac.w, lagrange.alpha3 * (delta - sw), &score);
            let w = ac.w.clone();
            axpy(params, -lagrange.alpha2 / (1.0 - gamma), &w);
        }
    }
    Ok(delta)
}
