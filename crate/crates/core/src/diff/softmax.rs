use rand::{Rng, RngCore};

use super::kl::kl_categorical;
use super::params::ParamLayout;
use super::policy::StochasticPolicy;
use crate::cmdp::TabularPolicy;
use crate::error::{check_dim, Error, Result};

/// Tabular softmax policy with one logit per state-action pair.
///
/// Observations are one-hot state encodings; the action is its index in `action[0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SoftmaxPolicy {
    pub n_states: usize,
    pub n_actions: usize,
}

impl SoftmaxPolicy {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions }
    }

    pub fn layout(&self) -> ParamLayout {
        let mut l = ParamLayout::new();
        l.push("logits", vec![self.n_states, self.n_actions]);
        l
    }

    pub fn state_index(&self, obs: &[f64]) -> Result<usize> {
        check_dim("one-hot observation", self.n_states, obs.len())?;
        obs.iter()
            .position(|v| *v == 1.0)
            .ok_or_else(|| Error::InvalidArgument("observation is not one-hot".into()))
    }

    pub fn probs_at(&self, params: &[f64], x: usize) -> Vec<f64> {
        let row = &params[x * self.n_actions..(x + 1) * self.n_actions];
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    }

    pub fn to_tabular(&self, params: &[f64]) -> Result<TabularPolicy> {
        check_dim("softmax parameters", self.n_params(), params.len())?;
        let probs = (0..self.n_states).flat_map(|x| self.probs_at(params, x)).collect();
        TabularPolicy::new(self.n_states, self.n_actions, probs)
    }

    fn action_index(&self, action: &[f64]) -> Result<usize> {
        check_dim("discrete action", 1, action.len())?;
        let a = action[0];
        if a < 0.0 || a.fract() != 0.0 || a as usize >= self.n_actions {
            return Err(Error::InvalidArgument(format!("action {a} out of range")));
        }
        Ok(a as usize)
    }
}

impl StochasticPolicy for SoftmaxPolicy {
    fn n_params(&self) -> usize {
        self.n_states * self.n_actions
    }

    fn obs_dim(&self) -> usize {
        self.n_states
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn log_prob(&self, params: &[f64], obs: &[f64], action: &[f64]) -> Result<f64> {
        check_dim("softmax parameters", self.n_params(), params.len())?;
        let x = self.state_index(obs)?;
        let a = self.action_index(action)?;
        Ok(self.probs_at(params, x)[a].ln())
    }

    fn log_prob_grad(&self, params: &[f64], obs: &[f64], action: &[f64], scale: f64, grad: &mut [f64]) -> Result<f64> {
        check_dim("softmax parameters", self.n_params(), params.len())?;
        check_dim("softmax gradient", self.n_params(), grad.len())?;
        let x = self.state_index(obs)?;
        let a = self.action_index(action)?;
        let p = self.probs_at(params, x);
        let g = &mut grad[x * self.n_actions..(x + 1) * self.n_actions];
        for (b, gb) in g.iter_mut().enumerate() {
            *gb += scale * ((b == a) as u8 as f64 - p[b]);
        }
        Ok(p[a].ln())
    }

    fn sample(&self, params: &[f64], obs: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let x = self.state_index(obs)?;
        let p = self.probs_at(params, x);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, pa) in p.iter().enumerate() {
            acc += pa;
            if u < acc {
                return Ok(vec![a as f64]);
            }
        }
        Ok(vec![(self.n_actions - 1) as f64])
    }

    fn mode(&self, params: &[f64], obs: &[f64]) -> Result<Vec<f64>> {
        let x = self.state_index(obs)?;
        let p = self.probs_at(params, x);
        let best = (0..self.n_actions).fold(0, |b, a| if p[a] > p[b] { a } else { b });
        Ok(vec![best as f64])
    }

    fn kl(&self, old: &[f64], new: &[f64], obs: &[f64]) -> Result<f64> {
        let x = self.state_index(obs)?;
        kl_categorical(&self.probs_at(old, x), &self.probs_at(new, x))
    }
}
