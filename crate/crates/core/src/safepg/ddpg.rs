//! Deterministic actor-critic learners: DDPG and its Lagrangian, θ-projection
//! and a-projection variants.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::config::{SafePgConfig, Variant};
use super::lagrange::LagrangeState;
use super::nets::{Critic, DeterministicActor};
use super::projection::{projection_vjp, safety_layer_project, theta_projection_multiplier, ProjectionResult};
use super::replay::{ReplayBuffer, ReplayItem};
use super::safeguard::{safeguard_triggered, tighten_threshold};
use crate::diff::{axpy, dot, soft_update, ParamVector};
use crate::error::{Error, Result};

/// `(1/n) Σ_x J_θ(π(x))ᵀ dq(x, π(x))` for an arbitrary action-gradient field `dq`.
pub fn deterministic_pg<F>(actor: &DeterministicActor, params: &[f64], states: &[&[f64]], mut dq: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    if states.is_empty() {
        return Err(Error::EmptyBatch("deterministic policy gradient"));
    }
    let w = 1.0 / states.len() as f64;
    let mut grad = vec![0.0; actor.n_params()];
    for x in states {
        let (tape, a) = actor.forward(params, x)?;
        let d = dq(x, &a)?;
        actor.backward(params, &tape, &a, &d, w, &mut grad)?;
    }
    Ok(grad)
}

/// Gradient of `Q_V(x, P(π_θ(x)))` where `P` projects onto the linearized
/// constraint around the baseline action `π_B(x)` with `g_L = ∇_a Q_W(x, π_B(x))`.
/// `g_L` and the baseline are constants with respect to θ.
pub fn a_projection_actor_grad(
    actor: &DeterministicActor,
    params: &[f64],
    baseline_params: &[f64],
    qv: &Critic,
    qw: &Critic,
    obs: &[f64],
    epsilon: f64,
) -> Result<(Vec<f64>, ProjectionResult)> {
    let a_b = actor.act(baseline_params, obs)?;
    let (_, g_l) = qw.action_grad(obs, &a_b)?;
    let (tape, a) = actor.forward(params, obs)?;
    let proj = safety_layer_project(&a, &a_b, &g_l, epsilon)?;
    let (_, dq) = qv.action_grad(obs, &proj.action)?;
    let d_unc = projection_vjp(&proj, &g_l, &dq);
    let mut grad = vec![0.0; actor.n_params()];
    actor.backward(params, &tape, &a, &d_unc, 1.0, &mut grad)?;
    Ok((grad, proj))
}

/// The objective differentiated by [`a_projection_actor_grad`].
pub fn a_projection_objective(
    actor: &DeterministicActor,
    params: &[f64],
    baseline_params: &[f64],
    qv: &Critic,
    qw: &Critic,
    obs: &[f64],
    epsilon: f64,
) -> Result<f64> {
    let a_b = actor.act(baseline_params, obs)?;
    let (_, g_l) = qw.action_grad(obs, &a_b)?;
    let a = actor.act(params, obs)?;
    let proj = safety_layer_project(&a, &a_b, &g_l, epsilon)?;
    qv.value(obs, &proj.action)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DdpgStepInfo {
    pub critic_loss_v: f64,
    pub critic_loss_w: f64,
    /// θ-projection multiplier (zero for other variants).
    pub lambda_star: f64,
    pub safeguard: bool,
    /// Fraction of minibatch states where the safety layer was active.
    pub active_fraction: f64,
    pub actor_step_norm: f64,
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub cfg: SafePgConfig,
    pub variant: Variant,
    pub actor: DeterministicActor,
    pub actor_params: ParamVector,
    pub actor_target: Vec<f64>,
    /// Snapshot of the actor at the start of the iteration (π_B).
    pub baseline: Vec<f64>,
    pub qv: Critic,
    pub qw: Critic,
    pub lagrange: LagrangeState,
    pub replay: ReplayBuffer,
    d0: f64,
    /// Per-step budget ε̃ of the safety layer.
    pub epsilon: f64,
    slack_used: f64,
    safeguard_active: bool,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(
        cfg: SafePgConfig,
        variant: Variant,
        obs_dim: usize,
        action_dim: usize,
        d0: f64,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let actor = DeterministicActor::new(obs_dim, action_dim, &cfg.actor_hidden, cfg.actor_activation)?;
        let actor_params = actor.init(rng);
        let qv = Critic::new(obs_dim, action_dim, &cfg.critic_hidden, cfg.critic_activation, cfg.critic_lr, rng)?;
        let qw = Critic::new(obs_dim, action_dim, &cfg.critic_hidden, cfg.critic_activation, cfg.critic_lr, rng)?;
        let lagrange = LagrangeState::new(cfg.lambda_init, cfg.lambda_max, cfg.lambda_lr, cfg.actor_lr, cfg.critic_lr)?;
        let d0_eff = tighten_threshold(d0, cfg.tighten_delta)?;
        Ok(Self {
            variant,
            actor_target: actor_params.as_slice().to_vec(),
            baseline: actor_params.as_slice().to_vec(),
            actor,
            actor_params,
            qv,
            qw,
            lagrange,
            replay: ReplayBuffer::new(cfg.replay_capacity),
            epsilon: (1.0 - cfg.gamma) * d0_eff,
            d0,
            slack_used: 0.0,
            safeguard_active: false,
            cfg,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn safeguard_active(&self) -> bool {
        self.safeguard_active
    }

    /// Starts an iteration given the constraint estimate `d_hat` of the current
    /// policy: snapshots π_B, rebuilds ε̃, moves λ and evaluates the safeguard trigger.
    pub fn begin_iteration(&mut self, d_hat: f64) -> Result<()> {
        let d0_eff = tighten_threshold(self.d0, self.cfg.tighten_delta)?;
        self.baseline = self.actor_params.as_slice().to_vec();
        self.epsilon = (1.0 - self.cfg.gamma) * (d0_eff - d_hat);
        self.slack_used = 0.0;
        if self.variant == Variant::Lagrangian {
            self.lagrange.dual_step(d_hat, d0_eff);
        }
        self.safeguard_active =
            self.variant.is_safe() && self.cfg.safeguard && safeguard_triggered(d_hat, self.d0, self.cfg.safeguard_margin);
        Ok(())
    }

    /// Policy action; exploration noise is added before the safety layer.
    pub fn act(&self, obs: &[f64], explore: Option<&mut dyn RngCore>) -> Result<(Vec<f64>, Option<ProjectionResult>)> {
        let mut a = self.actor.act(self.actor_params.as_slice(), obs)?;
        if let Some(rng) = explore {
            for ai in a.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *ai += self.cfg.exploration_std * z;
            }
        }
        if self.variant != Variant::AProjection {
            return Ok((a, None));
        }
        let a_b = self.actor.act(&self.baseline, obs)?;
        let (_, g_l) = self.qw.action_grad(obs, &a_b)?;
        let proj = safety_layer_project(&a, &a_b, &g_l, self.epsilon)?;
        Ok((proj.action.clone(), Some(proj)))
    }

    pub fn remember(&mut self, item: ReplayItem) {
        self.replay.push(item);
    }

    pub fn ready(&self) -> bool {
        self.replay.len() >= self.cfg.batch_size.max(self.cfg.warmup_steps)
    }

    /// Samples a minibatch and applies [`Self::update_on`].
    pub fn update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<DdpgStepInfo> {
        let batch: Vec<ReplayItem> = self.replay.sample(self.cfg.batch_size, rng)?.into_iter().cloned().collect();
        self.update_on(&batch)
    }

    /// One critic regression step toward bootstrapped targets for both critics,
    /// then one actor step according to the variant, then target smoothing.
    pub fn update_on(&mut self, batch: &[ReplayItem]) -> Result<DdpgStepInfo> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch("ddpg minibatch"));
        }
        let gamma = self.cfg.gamma;
        let mut yv = Vec::with_capacity(batch.len());
        let mut yw = Vec::with_capacity(batch.len());
        for it in batch {
            if it.terminal {
                yv.push(it.cost);
                yw.push(it.constraint_cost);
            } else {
                let a2 = self.actor.act(&self.actor_target, &it.next_obs)?;
                yv.push(it.cost + gamma * self.qv.target_value(&it.next_obs, &a2)?);
                yw.push(it.constraint_cost + gamma * self.qw.target_value(&it.next_obs, &a2)?);
            }
        }
        let mut info = DdpgStepInfo {
            critic_loss_v: self
                .qv
                .fit(batch.iter().zip(&yv).map(|(it, y)| (&it.obs[..], &it.action[..], *y)))?,
            critic_loss_w: self
                .qw
                .fit(batch.iter().zip(&yw).map(|(it, y)| (&it.obs[..], &it.action[..], *y)))?,
            ..DdpgStepInfo::default()
        };

        let states: Vec<&[f64]> = batch.iter().map(|it| &it.obs[..]).collect();
        let theta = self.actor_params.as_slice().to_vec();
        let alpha = self.cfg.actor_lr;
        let qv = &self.qv;
        let qw = &self.qw;
        let grad_w = || deterministic_pg(&self.actor, &theta, &states, |x, a| Ok(qw.action_grad(x, a)?.1));

        let step: Vec<f64> = if self.safeguard_active {
            info.safeguard = true;
            let gd = grad_w()?;
            gd.iter().map(|g| -self.cfg.safeguard_rate() * g).collect()
        } else {
            match self.variant {
                Variant::Unconstrained => {
                    let gc = deterministic_pg(&self.actor, &theta, &states, |x, a| Ok(qv.action_grad(x, a)?.1))?;
                    scaled(&gc, -alpha)
                }
                Variant::Lagrangian => {
                    let lam = self.lagrange.lambda;
                    let g = deterministic_pg(&self.actor, &theta, &states, |x, a| {
                        let mut d = qv.action_grad(x, a)?.1;
                        axpy(&mut d, lam, &qw.action_grad(x, a)?.1);
                        Ok(d)
                    })?;
                    scaled(&g, -alpha)
                }
                Variant::ThetaProjection => {
                    let gc = deterministic_pg(&self.actor, &theta, &states, |x, a| Ok(qv.action_grad(x, a)?.1))?;
                    let gd = grad_w()?;
                    if alpha == 0.0 {
                        vec![0.0; gc.len()]
                    } else {
                        let slack = self.epsilon - self.slack_used;
                        let m = theta_projection_multiplier(&gc, &gd, |v| v.to_vec(), slack, 1.0 / alpha)?;
                        info.lambda_star = m.lambda;
                        let mut s = scaled(&gc, -alpha);
                        if m.lambda > 0.0 {
                            axpy(&mut s, -alpha * m.lambda, &gd);
                        }
                        self.slack_used += dot(&gd, &s);
                        s
                    }
                }
                Variant::AProjection => {
                    let mut g = vec![0.0; theta.len()];
                    let mut active = 0usize;
                    let w = 1.0 / states.len() as f64;
                    for x in &states {
                        let (gx, proj) =
                            a_projection_actor_grad(&self.actor, &theta, &self.baseline, qv, qw, x, self.epsilon)?;
                        active += proj.active as usize;
                        axpy(&mut g, w, &gx);
                    }
                    info.active_fraction = active as f64 / states.len() as f64;
                    scaled(&g, -alpha)
                }
            }
        };
        info.actor_step_norm = dot(&step, &step).sqrt();
        axpy(self.actor_params.as_mut_slice(), 1.0, &step);

        let tau = self.cfg.tau;
        soft_update(&mut self.actor_target, self.actor_params.as_slice(), tau);
        self.qv.soft_update_target(tau);
        self.qw.soft_update_target(tau);
        Ok(info)
    }
}

fn scaled(v: &[f64], k: f64) -> Vec<f64> {
    v.iter().map(|x| k * x).collect()
}
