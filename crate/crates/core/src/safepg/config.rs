use serde::{Deserialize, Serialize};

use crate::diff::Activation;
use crate::error::{Error, Result};

/// Which safety mechanism wraps the base learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Unconstrained,
    Lagrangian,
    ThetaProjection,
    AProjection,
}

impl Variant {
    pub fn is_safe(self) -> bool {
        matches!(self, Variant::ThetaProjection | Variant::AProjection)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Unconstrained => "unconstrained",
            Variant::Lagrangian => "lagrangian",
            Variant::ThetaProjection => "theta_projection",
            Variant::AProjection => "a_projection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafePgConfig {
    pub gamma: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_activation: Activation,
    pub critic_activation: Activation,
    /// Plain gradient-descent rate of the actor (α).
    pub actor_lr: f64,
    /// Adam rate of every critic and value head.
    pub critic_lr: f64,

    // off-policy
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Target-network smoothing.
    pub tau: f64,
    pub updates_per_iteration: usize,
    pub exploration_std: f64,
    /// Transitions collected before any gradient step.
    pub warmup_steps: usize,

    // on-policy
    /// Initial KL penalty weight β.
    pub beta: f64,
    pub kl_target: f64,
    pub gae_lambda: f64,
    pub fisher_damping: f64,
    pub init_log_var: f64,
    pub value_epochs: usize,
    pub value_batch: usize,

    // Lagrangian
    pub lambda_init: f64,
    pub lambda_lr: f64,
    pub lambda_max: f64,

    // safety
    pub safeguard: bool,
    /// Safeguard fires when the constraint estimate exceeds `d0·(1 + margin)`.
    pub safeguard_margin: f64,
    /// `α_sg = safeguard_rate_factor · α`.
    pub safeguard_rate_factor: f64,
    /// Threshold tightening δ.
    pub tighten_delta: f64,
    /// Standard-deviation multiple kept feasible by the Gaussian safety layer.
    pub projection_k: f64,
    pub std_floor: f64,
}

impl Default for SafePgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            actor_hidden: vec![100, 50],
            critic_hidden: vec![200, 50],
            actor_activation: Activation::Relu,
            critic_activation: Activation::Tanh,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            batch_size: 64,
            replay_capacity: 100_000,
            tau: 0.01,
            updates_per_iteration: 50,
            exploration_std: 0.2,
            warmup_steps: 200,
            beta: 1.0,
            kl_target: 0.01,
            gae_lambda: 0.95,
            fisher_damping: 0.1,
            init_log_var: -1.0,
            value_epochs: 10,
            value_batch: 64,
            lambda_init: 0.0,
            lambda_lr: 0.05,
            lambda_max: 100.0,
            safeguard: true,
            safeguard_margin: 0.05,
            safeguard_rate_factor: 10.0,
            tighten_delta: 0.0,
            projection_k: 2.0,
            std_floor: 1e-3,
        }
    }
}

impl SafePgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("invalid {what}")));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma");
        }
        let rates = [
            self.actor_lr,
            self.critic_lr,
            self.tau,
            self.lambda_lr,
            self.safeguard_rate_factor,
            self.fisher_damping,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return bad("learning rate");
        }
        if !(self.fisher_damping > 0.0 && self.beta > 0.0 && self.kl_target > 0.0) {
            return bad("damping, beta or kl target");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) || self.tau > 1.0 {
            return bad("gae lambda or tau");
        }
        if !(0.0..1.0).contains(&self.tighten_delta) {
            return bad("tightening factor");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size || self.value_batch == 0 {
            return bad("batch size or replay capacity");
        }
        let zero_width = self.actor_hidden.iter().chain(&self.critic_hidden).any(|w| *w == 0);
        if self.actor_hidden.is_empty() || self.critic_hidden.is_empty() || zero_width {
            return bad("network sizes");
        }
        if !(self.lambda_max >= 0.0 && (0.0..=self.lambda_max).contains(&self.lambda_init)) {
            return bad("lambda bounds");
        }
        if !(self.std_floor > 0.0 && self.projection_k >= 0.0 && self.safeguard_margin >= 0.0) {
            return bad("projection settings");
        }
        Ok(())
    }

    pub fn safeguard_rate(&self) -> f64 {
        self.safeguard_rate_factor * self.actor_lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        assert!(SafePgConfig::default().validate().is_ok());
    }

    #[test]
    fn rejects_out_of_range() {
        let c = SafePgConfig {
            tighten_delta: 1.0,
            ..SafePgConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SafePgConfig {
            lambda_init: 5.0,
            lambda_max: 1.0,
            ..SafePgConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
