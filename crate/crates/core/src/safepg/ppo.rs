//! On-policy learners: PPO in penalty form, SPPO (θ-projection), the
//! Lagrangian variant and a Gaussian policy behind the safety layer.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::config::{SafePgConfig, Variant};
use super::lagrange::LagrangeState;
use super::nets::Critic;
use super::projection::{projection_vjp, safety_layer_project_gaussian, theta_projection_multiplier, ProjectionResult};
use super::safeguard::{safeguard_triggered, safeguard_update, tighten_threshold};
use crate::cmdp::Signal;
use crate::diff::{
    axpy, discounted_returns, discounted_to_go, dot, gae_advantages_bootstrapped, kl_diag_gaussian, Activation,
    EmpiricalFisher, GaussianPolicy, LogVarMode, MlpSpec, OutputHead, ParamVector, StochasticPolicy,
    TrajectoryBatch,
};
use crate::error::{check_dim, Error, Result};

const BETA_MIN: f64 = 1e-4;
const BETA_MAX: f64 = 1e6;

/// `(1/N) Σ_episodes Σ_t γ^t ∇log π(a_t|x_t) A_t`.
pub fn discounted_score_gradient(
    policy: &dyn StochasticPolicy,
    params: &[f64],
    batch: &TrajectoryBatch,
    advantages: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    if batch.n_episodes() == 0 {
        return Err(Error::EmptyBatch("policy gradient"));
    }
    check_dim("advantages", batch.n_steps(), advantages.len())?;
    let w = 1.0 / batch.n_episodes() as f64;
    let mut grad = vec![0.0; policy.n_params()];
    for ep in batch.episodes() {
        let mut disc = 1.0;
        for t in ep.range() {
            let s = &batch.steps()[t];
            if advantages[t] != 0.0 {
                policy.log_prob_grad(params, &s.obs, &s.action, w * disc * advantages[t], &mut grad)?;
            }
            disc *= gamma;
        }
    }
    Ok(grad)
}

/// Mean over batch states of `KL(π_old(·|x) ‖ π_new(·|x))`.
pub fn batch_mean_kl(policy: &dyn StochasticPolicy, old: &[f64], new: &[f64], batch: &TrajectoryBatch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch("kl"));
    }
    let mut total = 0.0;
    for s in batch.steps() {
        total += policy.kl(old, new, &s.obs)?;
    }
    Ok(total / batch.n_steps() as f64)
}

/// Doubles β above `2·target`, halves it below `target/2`.
pub fn adapt_beta(beta: f64, kl: f64, kl_target: f64) -> f64 {
    let next = if kl > 2.0 * kl_target {
        beta * 2.0
    } else if kl < kl_target / 2.0 {
        beta / 2.0
    } else {
        beta
    };
    next.clamp(BETA_MIN, BETA_MAX)
}

fn batch_fisher(policy: &dyn StochasticPolicy, params: &[f64], batch: &TrajectoryBatch, damping: f64) -> Result<EmpiricalFisher> {
    let states: Vec<Vec<f64>> = batch.steps().iter().map(|s| s.obs.clone()).collect();
    let actions: Vec<Vec<f64>> = batch.steps().iter().map(|s| s.action.clone()).collect();
    EmpiricalFisher::from_policy(policy, params, &states, actions.as_slice(), damping)
}

fn scaled(v: &[f64], k: f64) -> Vec<f64> {
    v.iter().map(|x| k * x).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoStep {
    pub gradient: Vec<f64>,
    pub step: Vec<f64>,
    /// Mean KL between the pre- and post-update policies on the batch.
    pub kl: f64,
    pub beta: f64,
    pub next_beta: f64,
    pub solver_converged: bool,
}

/// Minimizes the quadratic model `gᵀΔ + (β/2α) ΔᵀHΔ` of the KL-penalized
/// surrogate, with `H` the damped empirical Fisher matrix:
/// `Δ = −(α/β) H⁻¹ g`. Then adapts β from the measured KL.
pub fn ppo_update(
    policy: &dyn StochasticPolicy,
    params: &mut ParamVector,
    batch: &TrajectoryBatch,
    advantages: &[f64],
    beta: f64,
    cfg: &SafePgConfig,
) -> Result<PpoStep> {
    let g = discounted_score_gradient(policy, params.as_slice(), batch, advantages, cfg.gamma)?;
    let fisher = batch_fisher(policy, params.as_slice(), batch, cfg.fisher_damping)?;
    let sol = fisher.solve(&g);
    let step = scaled(&sol.solution, -cfg.actor_lr / beta);
    finish_step(policy, params, batch, g, step, beta, cfg, sol.converged)
}

#[allow(clippy::too_many_arguments)]
fn finish_step(
    policy: &dyn StochasticPolicy,
    params: &mut ParamVector,
    batch: &TrajectoryBatch,
    gradient: Vec<f64>,
    step: Vec<f64>,
    beta: f64,
    cfg: &SafePgConfig,
    solver_converged: bool,
) -> Result<PpoStep> {
    let old = params.as_slice().to_vec();
    axpy(params.as_mut_slice(), 1.0, &step);
    let kl = batch_mean_kl(policy, &old, params.as_slice(), batch)?;
    Ok(PpoStep {
        gradient,
        step,
        kl,
        beta,
        next_beta: adapt_beta(beta, kl, cfg.kl_target),
        solver_converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SppoStep {
    pub ppo: PpoStep,
    pub grad_d: Vec<f64>,
    pub lambda_star: f64,
    pub degenerate: bool,
    /// `d0 − D̂`, the budget for the linearized constraint change.
    pub slack: f64,
}

/// θ-projection step on the same quadratic model as [`ppo_update`] subject to
/// `D̂ + g_dᵀΔ ≤ d0`: `Δ = −(α/β) H⁻¹(g_c + λ* g_d)`. With `λ* = 0` the step is
/// computed exactly as the unconstrained one.
#[allow(clippy::too_many_arguments)]
pub fn sppo_theta_update(
    policy: &dyn StochasticPolicy,
    params: &mut ParamVector,
    batch: &TrajectoryBatch,
    adv_c: &[f64],
    adv_d: &[f64],
    d_hat: f64,
    d0: f64,
    beta: f64,
    cfg: &SafePgConfig,
) -> Result<SppoStep> {
    let gc = discounted_score_gradient(policy, params.as_slice(), batch, adv_c, cfg.gamma)?;
    let gd = discounted_score_gradient(policy, params.as_slice(), batch, adv_d, cfg.gamma)?;
    let fisher = batch_fisher(policy, params.as_slice(), batch, cfg.fisher_damping)?;
    let sol = fisher.solve(&gc);
    let alpha = cfg.actor_lr;
    let slack = d0 - d_hat;
    let mut hd = Vec::new();
    let mut converged = sol.converged;
    let m = if alpha == 0.0 {
        super::projection::ThetaMultiplier {
            lambda: 0.0,
            degenerate: false,
        }
    } else {
        theta_projection_multiplier(
            &gc,
            &gd,
            |v| {
                let s = fisher.solve(v);
                converged &= s.converged;
                hd = s.solution;
                hd.clone()
            },
            slack,
            beta / alpha,
        )?
    };
    let step = if m.lambda > 0.0 {
        let mut dir = sol.solution.clone();
        axpy(&mut dir, m.lambda, &hd);
        scaled(&dir, -alpha / beta)
    } else {
        scaled(&sol.solution, -alpha / beta)
    };
    let ppo = finish_step(policy, params, batch, gc, step, beta, cfg, converged)?;
    Ok(SppoStep {
        ppo,
        grad_d: gd,
        lambda_star: m.lambda,
        degenerate: m.degenerate,
        slack,
    })
}

/// Gaussian policy whose mean and spread pass through the safety layer around
/// a frozen baseline policy, with `g_L = ∇_a Q_W(x, μ_B(x))`.
/// Gradients flow through the mean projection; `g_L` and the spread scale
/// factor are held constant.
#[derive(Debug, Clone, Copy)]
pub struct ProjectedGaussian<'a> {
    pub base: &'a GaussianPolicy,
    pub baseline: &'a [f64],
    pub qw: &'a Critic,
    pub epsilon: f64,
    pub k: f64,
    pub std_floor: f64,
}

impl ProjectedGaussian<'_> {
    /// `(g_L, projection)` at `obs` for parameters `params`.
    pub fn project(&self, params: &[f64], obs: &[f64]) -> Result<(Vec<f64>, ProjectionResult)> {
        let dist = self.base.distribution(params, obs)?;
        let a_b = self.base.distribution(self.baseline, obs)?.mean;
        let (_, g) = self.qw.action_grad(obs, &a_b)?;
        let res = safety_layer_project_gaussian(&dist.mean, &dist.std(), &a_b, &g, self.epsilon, self.k, self.std_floor)?;
        Ok((g, res))
    }
}

fn normal_log_density(mean: &[f64], std: &[f64], x: &[f64]) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    mean.iter()
        .zip(std)
        .zip(x)
        .map(|((m, s), x)| {
            let z = (x - m) / s;
            -0.5 * (z * z + ln_2pi) - s.ln()
        })
        .sum()
}

impl StochasticPolicy for ProjectedGaussian<'_> {
    fn n_params(&self) -> usize {
        self.base.n_params()
    }

    fn obs_dim(&self) -> usize {
        self.base.obs_dim()
    }

    fn action_dim(&self) -> usize {
        self.base.action_dim()
    }

    fn log_prob(&self, params: &[f64], obs: &[f64], action: &[f64]) -> Result<f64> {
        check_dim("projected gaussian action", self.action_dim(), action.len())?;
        let (_, res) = self.project(params, obs)?;
        Ok(normal_log_density(&res.action, res.std.as_deref().unwrap_or_default(), action))
    }

    fn log_prob_grad(&self, params: &[f64], obs: &[f64], action: &[f64], scale: f64, grad: &mut [f64]) -> Result<f64> {
        check_dim("projected gaussian action", self.action_dim(), action.len())?;
        let (g, res) = self.project(params, obs)?;
        let std = res.std.clone().unwrap_or_default();
        let n = action.len();
        let mut dm = vec![0.0; n];
        let mut dlv = vec![0.0; n];
        for i in 0..n {
            let z = (action[i] - res.action[i]) / std[i];
            dm[i] = z / std[i];
            let floored = res.std_floor_hit && std[i] == self.std_floor;
            if !floored {
                dlv[i] = 0.5 * (z * z - 1.0);
            }
        }
        let dmean = projection_vjp(&res, &g, &dm);
        self.base.backward_dist(params, obs, &dmean, &dlv, scale, grad)?;
        Ok(normal_log_density(&res.action, &std, action))
    }

    fn sample(&self, params: &[f64], obs: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let (_, res) = self.project(params, obs)?;
        let std = res.std.unwrap_or_default();
        Ok(res
            .action
            .iter()
            .zip(&std)
            .map(|(m, s)| {
                let z: f64 = rng.sample(StandardNormal);
                m + s * z
            })
            .collect())
    }

    fn mode(&self, params: &[f64], obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.project(params, obs)?.1.action)
    }

    fn kl(&self, old: &[f64], new: &[f64], obs: &[f64]) -> Result<f64> {
        let (_, a) = self.project(old, obs)?;
        let (_, b) = self.project(new, obs)?;
        kl_diag_gaussian(
            &a.action,
            a.std.as_deref().unwrap_or_default(),
            &b.action,
            b.std.as_deref().unwrap_or_default(),
        )
    }
}

/// Several epochs of shuffled minibatch regression of a state-value head.
pub fn fit_value_head<R: Rng + ?Sized>(
    head: &mut Critic,
    states: &[&[f64]],
    targets: &[f64],
    epochs: usize,
    minibatch: usize,
    rng: &mut R,
) -> Result<f64> {
    check_dim("value targets", states.len(), targets.len())?;
    let mut idx: Vec<usize> = (0..states.len()).collect();
    let mut loss = 0.0;
    for _ in 0..epochs {
        idx.shuffle(rng);
        loss = 0.0;
        for chunk in idx.chunks(minibatch.max(1)) {
            let l = head.fit(chunk.iter().map(|&i| (states[i], &[][..], targets[i])))?;
            loss += l * chunk.len() as f64;
        }
        loss /= states.len().max(1) as f64;
    }
    Ok(loss)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PpoIterInfo {
    /// Mean discounted constraint return of the batch.
    pub d_hat: f64,
    pub kl: f64,
    pub beta: f64,
    /// λ for the Lagrangian variant, λ* for θ-projection, zero otherwise.
    pub lambda: f64,
    pub safeguard: bool,
    pub value_loss: f64,
    pub solver_converged: bool,
}

/// Gaussian actor with cost and constraint value heads.
#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub cfg: SafePgConfig,
    pub variant: Variant,
    pub policy: GaussianPolicy,
    pub params: ParamVector,
    pub v: Critic,
    pub w: Critic,
    /// `Q_W(x, a)` for the safety layer.
    pub qw: Critic,
    pub beta: f64,
    pub lagrange: LagrangeState,
    /// Baseline policy parameters for the safety layer.
    pub baseline: Vec<f64>,
    /// Per-step budget ε̃ of the safety layer.
    pub epsilon: f64,
    d0: f64,
}

impl PpoAgent {
    pub fn new<R: Rng + ?Sized>(
        cfg: SafePgConfig,
        variant: Variant,
        obs_dim: usize,
        action_dim: usize,
        d0: f64,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let net = MlpSpec::new(
            obs_dim,
            cfg.actor_hidden.clone(),
            cfg.actor_activation,
            OutputHead::Mean { dim: action_dim },
        )?;
        let policy = GaussianPolicy::new(net, LogVarMode::Free)?;
        let params = policy.init(rng, 0.1, cfg.init_log_var);
        let v = Critic::new(obs_dim, 0, &cfg.critic_hidden, cfg.critic_activation, cfg.critic_lr, rng)?;
        let w = Critic::new(obs_dim, 0, &cfg.critic_hidden, cfg.critic_activation, cfg.critic_lr, rng)?;
        let qw = Critic::new(obs_dim, action_dim, &cfg.critic_hidden, Activation::Tanh, cfg.critic_lr, rng)?;
        let lagrange = LagrangeState::new(cfg.lambda_init, cfg.lambda_max, cfg.lambda_lr, cfg.actor_lr, cfg.critic_lr)?;
        let d0_eff = tighten_threshold(d0, cfg.tighten_delta)?;
        Ok(Self {
            beta: cfg.beta,
            baseline: params.as_slice().to_vec(),
            epsilon: (1.0 - cfg.gamma) * d0_eff,
            variant,
            policy,
            params,
            v,
            w,
            qw,
            lagrange,
            d0,
            cfg,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn projected(&self) -> ProjectedGaussian<'_> {
        ProjectedGaussian {
            base: &self.policy,
            baseline: &self.baseline,
            qw: &self.qw,
            epsilon: self.epsilon,
            k: self.cfg.projection_k,
            std_floor: self.cfg.std_floor,
        }
    }

    /// Sampled action and its log-probability under the behaviour policy; the
    /// mode (with log-probability) when `rng` is `None`.
    pub fn act(&self, obs: &[f64], rng: Option<&mut dyn RngCore>) -> Result<(Vec<f64>, f64)> {
        let proj;
        let pol: &dyn StochasticPolicy = if self.variant == Variant::AProjection {
            proj = self.projected();
            &proj
        } else {
            &self.policy
        };
        let p = self.params.as_slice();
        let a = match rng {
            Some(r) => pol.sample(p, obs, r)?,
            None => pol.mode(p, obs)?,
        };
        let lp = pol.log_prob(p, obs, &a)?;
        Ok((a, lp))
    }

    /// One policy iteration on an on-policy batch.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &TrajectoryBatch, rng: &mut R) -> Result<PpoIterInfo> {
        if batch.n_episodes() == 0 {
            return Err(Error::EmptyBatch("ppo batch"));
        }
        let gamma = self.cfg.gamma;
        let d_returns = discounted_returns(batch, Signal::Constraint, gamma);
        let d_hat = d_returns.iter().sum::<f64>() / d_returns.len() as f64;
        let d0_eff = tighten_threshold(self.d0, self.cfg.tighten_delta)?;
        let safeguard =
            self.variant.is_safe() && self.cfg.safeguard && safeguard_triggered(d_hat, self.d0, self.cfg.safeguard_margin);

        let states: Vec<&[f64]> = batch.steps().iter().map(|s| &s.obs[..]).collect();
        let v_vals = states.iter().map(|x| self.v.value(x, &[])).collect::<Result<Vec<_>>>()?;
        let w_vals = states.iter().map(|x| self.w.value(x, &[])).collect::<Result<Vec<_>>>()?;
        let mut v_boot = Vec::with_capacity(batch.n_episodes());
        let mut w_boot = Vec::with_capacity(batch.n_episodes());
        for ep in batch.episodes() {
            let last = &batch.steps()[ep.start + ep.len - 1];
            v_boot.push(self.v.value(&last.next_obs, &[])?);
            w_boot.push(self.w.value(&last.next_obs, &[])?);
        }
        let lam = self.cfg.gae_lambda;
        let adv_c = gae_advantages_bootstrapped(batch, Signal::Cost, &v_vals, &v_boot, gamma, lam)?;
        let adv_d = gae_advantages_bootstrapped(batch, Signal::Constraint, &w_vals, &w_boot, gamma, lam)?;

        let mut info = PpoIterInfo {
            d_hat,
            beta: self.beta,
            safeguard,
            ..PpoIterInfo::default()
        };
        let mut params = self.params.clone();
        let old = params.as_slice().to_vec();
        {
            let proj;
            let pol: &dyn StochasticPolicy = if self.variant == Variant::AProjection {
                proj = self.projected();
                &proj
            } else {
                &self.policy
            };
            let step = if safeguard {
                let gd = discounted_score_gradient(pol, params.as_slice(), batch, &adv_d, gamma)?;
                safeguard_update(params.as_mut_slice(), &gd, self.cfg.safeguard_rate())?;
                let kl = batch_mean_kl(pol, &old, params.as_slice(), batch)?;
                PpoStep {
                    gradient: gd,
                    step: Vec::new(),
                    kl,
                    beta: self.beta,
                    next_beta: self.beta,
                    solver_converged: true,
                }
            } else {
                match self.variant {
                    Variant::Unconstrained | Variant::AProjection => {
                        ppo_update(pol, &mut params, batch, &adv_c, self.beta, &self.cfg)?
                    }
                    Variant::Lagrangian => {
                        let l = self.lagrange.lambda;
                        info.lambda = l;
                        let adv: Vec<f64> = adv_c.iter().zip(&adv_d).map(|(c, d)| c + l * d).collect();
                        ppo_update(pol, &mut params, batch, &adv, self.beta, &self.cfg)?
                    }
                    Variant::ThetaProjection => {
                        let s = sppo_theta_update(pol, &mut params, batch, &adv_c, &adv_d, d_hat, d0_eff, self.beta, &self.cfg)?;
                        info.lambda = s.lambda_star;
                        s.ppo
                    }
                }
            };
            info.kl = step.kl;
            info.solver_converged = step.solver_converged;
            self.beta = step.next_beta;
        }
        self.params = params;

        let v_targets: Vec<f64> = adv_c.iter().zip(&v_vals).map(|(a, v)| a + v).collect();
        let w_targets: Vec<f64> = adv_d.iter().zip(&w_vals).map(|(a, v)| a + v).collect();
        let (epochs, mb) = (self.cfg.value_epochs, self.cfg.value_batch);
        info.value_loss = fit_value_head(&mut self.v, &states, &v_targets, epochs, mb, rng)?;
        fit_value_head(&mut self.w, &states, &w_targets, epochs, mb, rng)?;

        if self.variant == Variant::AProjection {
            let to_go = discounted_to_go(batch, Signal::Constraint, gamma);
            let mut idx: Vec<usize> = (0..states.len()).collect();
            for _ in 0..epochs {
                idx.shuffle(rng);
                for chunk in idx.chunks(mb.max(1)) {
                    let steps = batch.steps();
                    self.qw
                        .fit(chunk.iter().map(|&i| (&steps[i].obs[..], &steps[i].action[..], to_go[i])))?;
                }
            }
            self.baseline = old;
            self.epsilon = (1.0 - gamma) * (d0_eff - d_hat);
        }
        if self.variant == Variant::Lagrangian {
            self.lagrange.dual_step(d_hat, d0_eff);
        }
        Ok(info)
    }
}

/// `D̂ + g_dᵀΔ`, the linearized constraint value after a step.
pub fn linearized_constraint(d_hat: f64, grad_d: &[f64], step: &[f64]) -> f64 {
    d_hat + dot(grad_d, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::Transition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> SafePgConfig {
        SafePgConfig {
            actor_hidden: vec![6],
            critic_hidden: vec![8],
            actor_lr: 0.05,
            value_epochs: 2,
            value_batch: 16,
            ..SafePgConfig::default()
        }
    }

    fn synthetic_batch(agent: &PpoAgent, rng: &mut ChaCha8Rng, episodes: usize, with_d: bool) -> TrajectoryBatch {
        let mut batch = TrajectoryBatch::new();
        for _ in 0..episodes {
            let mut steps = Vec::new();
            let mut x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            for t in 0..8 {
                let (a, lp) = agent.act(&x, Some(rng)).unwrap();
                let next = vec![x[0] + 0.1 * a[0], x[1] - 0.1 * a[0]];
                steps.push(Transition {
                    obs: x.clone(),
                    action: a.clone(),
                    cost: (next[0] - 0.5).powi(2),
                    constraint_cost: if with_d { (next[1] > 0.0) as u8 as f64 } else { 0.0 },
                    log_prob: lp,
                    next_obs: next.clone(),
                    terminal: t == 7,
                });
                x = next;
            }
            batch.push_episode(steps).unwrap();
        }
        batch
    }

    #[test]
    fn zero_advantages_keep_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let agent = PpoAgent::new(small_cfg(), Variant::Unconstrained, 2, 1, 1.0, &mut rng).unwrap();
        let batch = synthetic_batch(&agent, &mut rng, 4, false);
        let mut p = agent.params.clone();
        let zeros = vec![0.0; batch.n_steps()];
        let s = ppo_update(&agent.policy, &mut p, &batch, &zeros, 1.0, &agent.cfg).unwrap();
        assert_eq!(p, agent.params);
        assert_eq!(s.kl, 0.0);
    }

    #[test]
    fn huge_beta_gives_tiny_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let agent = PpoAgent::new(small_cfg(), Variant::Unconstrained, 2, 1, 1.0, &mut rng).unwrap();
        let batch = synthetic_batch(&agent, &mut rng, 4, false);
        let adv: Vec<f64> = batch.steps().iter().map(|s| s.cost - 0.3).collect();
        let mut p1 = agent.params.clone();
        let s1 = ppo_update(&agent.policy, &mut p1, &batch, &adv, 1.0, &agent.cfg).unwrap();
        let mut p2 = agent.params.clone();
        let s2 = ppo_update(&agent.policy, &mut p2, &batch, &adv, 1e6, &agent.cfg).unwrap();
        let n1 = dot(&s1.step, &s1.step).sqrt();
        let n2 = dot(&s2.step, &s2.step).sqrt();
        assert!(n1 > 0.0);
        assert!(n2 < 1e-5 * n1, "{n2} vs {n1}");
    }

    #[test]
    fn beta_rule() {
        assert_eq!(adapt_beta(1.0, 0.05, 0.01), 2.0);
        assert_eq!(adapt_beta(1.0, 0.001, 0.01), 0.5);
        assert_eq!(adapt_beta(1.0, 0.01, 0.01), 1.0);
        assert_eq!(adapt_beta(BETA_MAX, 1.0, 0.01), BETA_MAX);
    }

    #[test]
    fn empty_batch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut agent = PpoAgent::new(small_cfg(), Variant::Unconstrained, 2, 1, 1.0, &mut rng).unwrap();
        assert!(matches!(agent.update(&TrajectoryBatch::new(), &mut rng), Err(Error::EmptyBatch(_))));
    }

    #[test]
    fn sppo_without_constraint_matches_ppo() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = PpoAgent::new(small_cfg(), Variant::Unconstrained, 2, 1, 1.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let mut b = PpoAgent::new(small_cfg(), Variant::ThetaProjection, 2, 1, 1.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let (mut ra, mut rb) = (ChaCha8Rng::seed_from_u64(4), ChaCha8Rng::seed_from_u64(4));
        for _ in 0..3 {
            let batch = synthetic_batch(&a, &mut rng, 4, false);
            a.update(&batch, &mut ra).unwrap();
            b.update(&batch, &mut rb).unwrap();
            assert_eq!(a.params, b.params);
            assert_eq!(a.beta, b.beta);
        }
    }

    #[test]
    fn sppo_step_respects_linearized_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = SafePgConfig {
            actor_lr: 1.0,
            ..small_cfg()
        };
        let agent = PpoAgent::new(cfg.clone(), Variant::ThetaProjection, 2, 1, 1.0, &mut rng).unwrap();
        let batch = synthetic_batch(&agent, &mut rng, 16, true);
        let adv_c: Vec<f64> = discounted_to_go(&batch, Signal::Cost, cfg.gamma);
        let adv_d: Vec<f64> = discounted_to_go(&batch, Signal::Constraint, cfg.gamma);
        let d_ret = discounted_returns(&batch, Signal::Constraint, cfg.gamma);
        let d_hat = d_ret.iter().sum::<f64>() / d_ret.len() as f64;
        for d0 in [d_hat - 0.05, d_hat, d_hat + 0.01, d_hat + 10.0] {
            let mut p = agent.params.clone();
            let s = sppo_theta_update(&agent.policy, &mut p, &batch, &adv_c, &adv_d, d_hat, d0, 0.01, &cfg).unwrap();
            let lin = linearized_constraint(d_hat, &s.grad_d, &s.ppo.step);
            assert!(lin <= d0 + 1e-6, "d0 {d0}: {lin}");
            if s.lambda_star > 0.0 {
                assert!((lin - d0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn projected_gaussian_inactive_matches_base() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let agent = PpoAgent::new(small_cfg(), Variant::AProjection, 2, 1, 1.0, &mut rng).unwrap();
        let pg = agent.projected();
        let x = [0.3, -0.2];
        let a = [0.4];
        let p = agent.params.as_slice();
        // Q_W starts at zero, so g_L is degenerate and nothing is projected
        let mut g1 = vec![0.0; agent.policy.n_params()];
        let mut g2 = vec![0.0; agent.policy.n_params()];
        let l1 = pg.log_prob_grad(p, &x, &a, 1.0, &mut g1).unwrap();
        let l2 = agent.policy.log_prob_grad(p, &x, &a, 1.0, &mut g2).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (u, v) in g1.iter().zip(&g2) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn projected_gaussian_score_matches_frozen_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut agent = PpoAgent::new(small_cfg(), Variant::AProjection, 2, 2, 1.0, &mut rng).unwrap();
        agent.qw.params = agent.qw.spec.init(&mut rng, 1.0);
        agent.epsilon = -0.05;
        let pg = agent.projected();
        let x = [0.3, -0.2];
        let p = agent.params.as_slice();
        let (_, res) = pg.project(p, &x).unwrap();
        assert!(res.active);
        // the mean path: with the spread held fixed the score equals the
        // derivative of log N(a; P(μ_θ), σ) along θ through the projection
        let a = [0.1, 0.2];
        let mut g = vec![0.0; agent.policy.n_params()];
        pg.log_prob_grad(p, &x, &a, 1.0, &mut g).unwrap();
        let std = res.std.clone().unwrap();
        let f = |theta: &[f64]| {
            let (_, r) = pg.project(theta, &x).unwrap();
            normal_log_density(&r.action, &std, &a)
        };
        let n_net = agent.policy.net.n_params();
        for i in 0..n_net {
            let mut e = vec![0.0; p.len()];
            e[i] = 1.0;
            let chk = crate::diff::gradcheck::check_directional(f, p, &e, g[i], 1e-6);
            assert!(chk.rel_error < 1e-4 || chk.numeric.abs() < 1e-7, "{i}: {chk:?}");
        }
    }
}
