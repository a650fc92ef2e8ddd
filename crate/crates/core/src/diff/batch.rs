use std::ops::Range;

use crate::cmdp::Signal;
use crate::error::{check_dim, Error, Result};

/// One environment step as recorded during a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub cost: f64,
    pub constraint_cost: f64,
    /// Log-probability of `action` under the behaviour policy.
    pub log_prob: f64,
    pub next_obs: Vec<f64>,
    /// True when `next_obs` is absorbing (its value is zero).
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub start: usize,
    pub len: usize,
    /// Undiscounted sums.
    pub cost_return: f64,
    pub constraint_return: f64,
}

impl EpisodeSummary {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// Flat per-step storage plus episode boundaries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryBatch {
    steps: Vec<Transition>,
    episodes: Vec<EpisodeSummary>,
}

impl TrajectoryBatch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_episode(&mut self, steps: Vec<Transition>) -> Result<()> {
        if steps.is_empty() {
            return Err(Error::EmptyBatch("episode"));
        }
        if let Some(i) = steps.iter().take(steps.len() - 1).position(|t| t.terminal) {
            return Err(Error::InvalidArgument(format!("terminal flag set mid-episode at step {i}")));
        }
        let summary = EpisodeSummary {
            start: self.steps.len(),
            len: steps.len(),
            cost_return: steps.iter().map(|t| t.cost).sum(),
            constraint_return: steps.iter().map(|t| t.constraint_cost).sum(),
        };
        self.steps.extend(steps);
        self.episodes.push(summary);
        Ok(())
    }

    pub fn extend(&mut self, other: TrajectoryBatch) {
        for ep in other.episodes() {
            let steps = other.steps[ep.range()].to_vec();
            self.push_episode(steps).expect("episodes from a valid batch");
        }
    }

    pub fn steps(&self) -> &[Transition] {
        &self.steps
    }

    pub fn episodes(&self) -> &[EpisodeSummary] {
        &self.episodes
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn n_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn signal(&self, which: Signal) -> Vec<f64> {
        self.steps
            .iter()
            .map(|t| match which {
                Signal::Cost => t.cost,
                Signal::Constraint => t.constraint_cost,
            })
            .collect()
    }
}

/// `Σ_t γ^t h_t` for each episode, with `h` the cost or constraint cost.
pub fn discounted_returns(batch: &TrajectoryBatch, which: Signal, gamma: f64) -> Vec<f64> {
    let h = batch.signal(which);
    batch
        .episodes()
        .iter()
        .map(|ep| {
            let mut g = 1.0;
            let mut total = 0.0;
            for v in &h[ep.range()] {
                total += g * v;
                g *= gamma;
            }
            total
        })
        .collect()
}

/// Per-step `Σ_{k≥t} γ^{k−t} h_k` within each episode.
pub fn discounted_to_go(batch: &TrajectoryBatch, which: Signal, gamma: f64) -> Vec<f64> {
    let h = batch.signal(which);
    let mut out = vec![0.0; h.len()];
    for ep in batch.episodes() {
        let mut acc = 0.0;
        for t in ep.range().rev() {
            acc = h[t] + gamma * acc;
            out[t] = acc;
        }
    }
    out
}

/// Generalized advantage estimates. The value after an episode's last step
/// is zero for terminal endings and `bootstrap[episode]` otherwise.
pub fn gae_advantages_bootstrapped(
    batch: &TrajectoryBatch,
    which: Signal,
    values: &[f64],
    bootstrap: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    check_dim("gae values", batch.n_steps(), values.len())?;
    check_dim("gae bootstrap values", batch.n_episodes(), bootstrap.len())?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("gae lambda {lambda} outside [0, 1]")));
    }
    let h = batch.signal(which);
    let mut adv = vec![0.0; h.len()];
    for (e, ep) in batch.episodes().iter().enumerate() {
        let mut acc = 0.0;
        let last = ep.start + ep.len - 1;
        for t in ep.range().rev() {
            let next_v = if t == last {
                if batch.steps[t].terminal {
                    0.0
                } else {
                    bootstrap[e]
                }
            } else {
                values[t + 1]
            };
            let delta = h[t] + gamma * next_v - values[t];
            acc = delta + gamma * lambda * acc;
            adv[t] = acc;
        }
    }
    Ok(adv)
}

/// GAE treating every episode end as absorbing.
pub fn gae_advantages(batch: &TrajectoryBatch, which: Signal, values: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    gae_advantages_bootstrapped(batch, which, values, &vec![0.0; batch.n_episodes()], gamma, lambda)
}
