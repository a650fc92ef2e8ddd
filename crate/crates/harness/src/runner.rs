//! Training loop shared by the CLI and the acceptance suite.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use lyapunov_core::cmdp::Signal;
use lyapunov_core::diff::{discounted_returns, TrajectoryBatch};
use lyapunov_core::envs::Env;
use lyapunov_core::safepg::{DdpgAgent, PpoAgent, ReplayItem, Variant};
use rand::RngCore;

use crate::checkpoint::Checkpoint;
use crate::config::{ExperimentConfig, Family};
use crate::error::Result;
use crate::evaluate::{evaluate_policy, run_episode};
use crate::metrics::{write_traces, MetricsRow, MetricsWriter};
use crate::seeds::{substream, Substream};

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows: Vec<MetricsRow>,
    /// Actor parameters after every iteration.
    pub param_trace: Vec<Vec<f64>>,
    pub checkpoint: Checkpoint,
}

enum Learner {
    Off(Box<DdpgAgent>),
    On(Box<PpoAgent>),
}

impl Learner {
    fn actor(&self) -> &[f64] {
        match self {
            Learner::Off(a) => a.actor_params.as_slice(),
            Learner::On(a) => a.params.as_slice(),
        }
    }

    fn mode(&self, obs: &[f64]) -> lyapunov_core::Result<Vec<f64>> {
        match self {
            Learner::Off(a) => Ok(a.act(obs, None)?.0),
            Learner::On(a) => Ok(a.act(obs, None)?.0),
        }
    }

    fn checkpoint(&self, config: &ExperimentConfig) -> Checkpoint {
        let (actor, baseline, qw, epsilon) = match self {
            Learner::Off(a) => (a.actor_params.clone(), a.baseline.clone(), a.qw.params.clone(), a.epsilon),
            Learner::On(a) => (a.params.clone(), a.baseline.clone(), a.qw.params.clone(), a.epsilon),
        };
        Checkpoint {
            config: config.clone(),
            actor,
            baseline,
            qw,
            epsilon,
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Trains according to `config`, handing each metrics row to `on_row` as it is produced.
pub fn train_with(config: &ExperimentConfig, on_row: &mut dyn FnMut(&MetricsRow) -> Result<()>) -> Result<RunOutcome> {
    config.validate()?;
    let mut env = config.build_env()?;
    let mut eval_env = env.clone();
    let (obs_dim, action_dim, d0) = (env.obs_dim(), env.action_dim(), env.d0());
    let cfg = &config.safepg;
    let gamma = cfg.gamma;
    let variant = config.algorithm.variant();

    let mut init_rng = substream(config.seed, Substream::Init);
    let mut env_rng = substream(config.seed, Substream::Env);
    let mut rng = substream(config.seed, Substream::Rollout);

    let mut learner = match config.algorithm.family() {
        Family::OffPolicy => Learner::Off(Box::new(DdpgAgent::new(
            cfg.clone(),
            variant,
            obs_dim,
            action_dim,
            d0,
            &mut init_rng,
        )?)),
        Family::OnPolicy => Learner::On(Box::new(PpoAgent::new(
            cfg.clone(),
            variant,
            obs_dim,
            action_dim,
            d0,
            &mut init_rng,
        )?)),
    };

    let mut rows = Vec::with_capacity(config.iterations);
    let mut param_trace = Vec::with_capacity(config.iterations);
    for it in 1..=config.iterations {
        let started = Instant::now();
        let mut batch = TrajectoryBatch::new();
        let (policy_kl, lambda) = match &mut learner {
            Learner::Off(agent) => {
                for _ in 0..config.episodes_per_iteration {
                    let seed = env_rng.next_u64();
                    let steps = run_episode(env.as_mut(), seed, &mut |x| Ok((agent.act(x, Some(&mut rng))?.0, 0.0)))?;
                    for s in &steps {
                        agent.remember(ReplayItem {
                            obs: s.obs.clone(),
                            action: s.action.clone(),
                            cost: s.cost,
                            constraint_cost: s.constraint_cost,
                            next_obs: s.next_obs.clone(),
                            terminal: s.terminal,
                        });
                    }
                    batch.push_episode(steps)?;
                }
                let d_hat = mean(&discounted_returns(&batch, Signal::Constraint, gamma));
                agent.begin_iteration(d_hat)?;
                let before = agent.actor_params.as_slice().to_vec();
                let mut lambda_star = Vec::new();
                for _ in 0..cfg.updates_per_iteration {
                    if agent.ready() {
                        lambda_star.push(agent.update(&mut rng)?.lambda_star);
                    }
                }
                // KL between N(π_old(x), σ²) and N(π_new(x), σ²) on this iteration's states
                let sigma2 = cfg.exploration_std.max(1e-6).powi(2);
                let mut kl = 0.0;
                for s in batch.steps() {
                    let a_old = agent.actor.act(&before, &s.obs)?;
                    let a_new = agent.actor.act(agent.actor_params.as_slice(), &s.obs)?;
                    kl += a_old.iter().zip(&a_new).map(|(u, v)| (u - v).powi(2)).sum::<f64>() / (2.0 * sigma2);
                }
                log::debug!(
                    "iteration {it}: d_hat {d_hat:.3} epsilon {:.4} safeguard {} updates {}",
                    agent.epsilon(),
                    agent.safeguard_active(),
                    lambda_star.len()
                );
                let lambda = match variant {
                    Variant::Lagrangian => Some(agent.lagrange.lambda),
                    Variant::ThetaProjection => Some(mean(&lambda_star)),
                    _ => None,
                };
                (kl / batch.n_steps() as f64, lambda)
            }
            Learner::On(agent) => {
                for _ in 0..config.episodes_per_iteration {
                    let seed = env_rng.next_u64();
                    let steps = run_episode(env.as_mut(), seed, &mut |x| agent.act(x, Some(&mut rng)))?;
                    batch.push_episode(steps)?;
                }
                let info = agent.update(&batch, &mut rng)?;
                let lambda = match variant {
                    Variant::Lagrangian | Variant::ThetaProjection => Some(info.lambda),
                    _ => None,
                };
                (info.kl, lambda)
            }
        };
        let eval = evaluate_policy(
            &mut |x| learner.mode(x),
            eval_env.as_mut(),
            config.eval_episodes,
            config.seed,
            gamma,
        )?;
        let row = MetricsRow {
            iteration: it,
            mean_return: eval.mean_return,
            mean_constraint_return: eval.mean_constraint_return,
            violation_fraction: eval.violation_fraction,
            policy_kl,
            lambda,
            wall_clock: config.record_wall_clock.then(|| started.elapsed().as_secs_f64()),
        };
        log::info!(
            "{} iteration {it}: return {:.3} constraint {:.3} violations {:.2}",
            config.algorithm.name(),
            row.mean_return,
            row.mean_constraint_return,
            row.violation_fraction
        );
        on_row(&row)?;
        rows.push(row);
        param_trace.push(learner.actor().to_vec());
    }
    Ok(RunOutcome {
        rows,
        param_trace,
        checkpoint: learner.checkpoint(config),
    })
}

pub fn train(config: &ExperimentConfig) -> Result<RunOutcome> {
    train_with(config, &mut |_| Ok(()))
}

/// Validates the config, then writes `metrics.csv`, `traces.csv`, `checkpoint.json`
/// and the resolved `config.toml` under the output directory. Returns the metrics path.
pub fn run_experiment(config: &ExperimentConfig) -> Result<PathBuf> {
    config.validate()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), config.to_toml_string()?)?;
    let metrics_path = dir.join("metrics.csv");
    let mut writer = MetricsWriter::create(&metrics_path)?;
    let outcome = train_with(config, &mut |row| {
        writer.write(row)?;
        writer.flush()
    })?;
    writer.flush()?;
    write_traces(
        BufWriter::new(File::create(dir.join("traces.csv"))?),
        config.algorithm.name(),
        config.seed,
        &outcome.rows,
    )?;
    outcome.checkpoint.save(&dir.join("checkpoint.json"))?;
    Ok(metrics_path)
}
