//! Episode rollouts and the evaluation protocol.

use lyapunov_core::diff::Transition;
use lyapunov_core::envs::Env;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::seeds::{substream, Substream};

/// Runs one episode from `env.reset(seed)`; `act` returns the action and its log-probability.
pub fn run_episode(
    env: &mut dyn Env,
    seed: u64,
    act: &mut dyn FnMut(&[f64]) -> lyapunov_core::Result<(Vec<f64>, f64)>,
) -> Result<Vec<Transition>> {
    let mut obs = env.reset(seed);
    let mut steps = Vec::with_capacity(env.horizon());
    loop {
        let (action, log_prob) = act(&obs)?;
        let r = env.step(&action)?;
        steps.push(Transition {
            obs,
            action,
            cost: r.cost,
            constraint_cost: r.constraint_cost,
            log_prob,
            next_obs: r.obs.clone(),
            terminal: r.terminal,
        });
        obs = r.obs;
        if r.done {
            return Ok(steps);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    /// Undiscounted sums.
    pub mean_return: f64,
    pub mean_constraint_return: f64,
    /// Episodes whose undiscounted constraint return exceeds d0.
    pub violation_fraction: f64,
    pub mean_discounted_return: f64,
    pub mean_discounted_constraint_return: f64,
    /// Standard errors of the two discounted means.
    pub discounted_return_se: f64,
    pub discounted_constraint_se: f64,
}

/// Episode seeds used by every evaluation of a run with master seed `seed`.
/// They come from a dedicated stream, so they never coincide with training resets.
pub fn evaluation_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = substream(seed, Substream::Eval);
    (0..n).map(|_| rng.next_u64()).collect()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Runs `n_episodes` with `policy` from the fixed evaluation seed set of `seed`.
pub fn evaluate_policy(
    policy: &mut dyn FnMut(&[f64]) -> lyapunov_core::Result<Vec<f64>>,
    env: &mut dyn Env,
    n_episodes: usize,
    seed: u64,
    gamma: f64,
) -> Result<EvalSummary> {
    if n_episodes == 0 {
        return Err(crate::error::HarnessError::Config("evaluation needs at least one episode".into()));
    }
    let d0 = env.d0();
    let mut ret = Vec::with_capacity(n_episodes);
    let mut cret = Vec::with_capacity(n_episodes);
    let mut dret = Vec::with_capacity(n_episodes);
    let mut dcret = Vec::with_capacity(n_episodes);
    let mut act = |obs: &[f64]| Ok((policy(obs)?, 0.0));
    for s in evaluation_seeds(seed, n_episodes) {
        let steps = run_episode(env, s, &mut act)?;
        let (mut c, mut d, mut dc, mut dd, mut disc) = (0.0, 0.0, 0.0, 0.0, 1.0);
        for t in &steps {
            c += t.cost;
            d += t.constraint_cost;
            dc += disc * t.cost;
            dd += disc * t.constraint_cost;
            disc *= gamma;
        }
        ret.push(c);
        cret.push(d);
        dret.push(dc);
        dcret.push(dd);
    }
    let (mdr, dr_se) = mean_se(&dret);
    let (mdc, dc_se) = mean_se(&dcret);
    Ok(EvalSummary {
        episodes: n_episodes,
        mean_return: mean_se(&ret).0,
        mean_constraint_return: mean_se(&cret).0,
        violation_fraction: cret.iter().filter(|d| **d > d0).count() as f64 / n_episodes as f64,
        mean_discounted_return: mdr,
        mean_discounted_constraint_return: mdc,
        discounted_return_se: dr_se,
        discounted_constraint_se: dc_se,
    })
}
