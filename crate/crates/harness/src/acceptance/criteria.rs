use lyapunov_core::cmdp::{
    constraint_budget, discounted_visitation, epsilon_constant, epsilon_state_dependent, lp_optimal_cmdp,
    policy_evaluate, softmax_policy_gradient, spi_run, spi_step, Signal, TabularCmdp, TabularPolicy,
};
use lyapunov_core::diff::gradcheck::check_directional;
use lyapunov_core::diff::{
    gae_advantages, gaussian_logprob, mlp_backward, Activation, GaussianPolicy, LogVarMode, MlpSpec, OutputHead,
    ParamVector, SoftmaxPolicy, StochasticPolicy, TrajectoryBatch,
};
use lyapunov_core::envs::{six_state_fixture, EnvSpec, GatherConfig, GridworldEnv};
use lyapunov_core::safepg::{
    a_projection_actor_grad, a_projection_objective, lagrangian_pg_gradient, ppo_update, safety_layer_project,
    theta_projection_multiplier, Critic, DeterministicActor, ProjectionResult, SafePgConfig, Variant,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracles::{cosine, discounted_state_sum, halfspace_projection, mean_se, theta_multiplier_kkt};
use super::{Fault, SoftCheck, TraceSeries};
use crate::config::{Algorithm, ExperimentConfig};
use crate::evaluate::{evaluate_policy, run_episode};
use crate::metrics::MetricsWriter;
use crate::runner::{train, train_with};
use crate::Result;

pub(crate) struct Outcome {
    pub passed: bool,
    pub observed: String,
    pub expected: String,
    pub soft: Vec<SoftCheck>,
    pub time_limit: Option<f64>,
}

impl Outcome {
    fn new(passed: bool, observed: String, expected: &str) -> Self {
        Self {
            passed,
            observed,
            expected: expected.to_string(),
            soft: Vec::new(),
            time_limit: None,
        }
    }

    pub fn fail(observed: String, expected: &str) -> Self {
        Self::new(false, observed, expected)
    }
}

/// 100 random 5-state, 3-action instances with a feasible random initial policy.
fn random_instances() -> Result<Vec<(TabularCmdp, TabularPolicy)>> {
    (0..100u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
            let base = TabularCmdp::random(5, 3, 0.9, &mut rng);
            let pi = TabularPolicy::random(5, 3, &mut rng);
            let d = policy_evaluate(&base, &pi, Signal::Constraint)?[base.x0()];
            let d0 = d + rng.random_range(0.0..1.0);
            Ok((base.with_d0(d0), pi))
        })
        .collect()
}

pub(crate) fn spi_safety() -> Result<Outcome> {
    let (mut unsafe_iters, mut non_monotone, mut below_lp) = (0, 0, 0);
    let mut gaps = Vec::new();
    let (mut state_increases, mut state_checks) = (0, 0);
    for (cmdp, pi0) in random_instances()? {
        let out = spi_run(&cmdp, &pi0, 500, 1e-12)?;
        // improvement away from x0, replayed step by step
        let mut pi = pi0.clone();
        let mut c = policy_evaluate(&cmdp, &pi, Signal::Cost)?;
        for _ in 1..out.log.len() {
            let next = spi_step(&cmdp, &pi)?;
            let c_next = policy_evaluate(&cmdp, &next, Signal::Cost)?;
            state_checks += c.len();
            state_increases += c_next.iter().zip(&c).filter(|(n, o)| **n > **o + 1e-8).count();
            (pi, c) = (next, c_next);
        }
        for w in out.log.windows(2) {
            if w[1].cost > w[0].cost + 1e-8 {
                non_monotone += 1;
            }
        }
        unsafe_iters += out.log.iter().filter(|it| it.constraint > cmdp.d0() + 1e-8).count();
        let lp = lp_optimal_cmdp(&cmdp)?.value;
        let last = out.log.last().expect("log holds the initial policy").cost;
        if last < lp - 1e-8 {
            below_lp += 1;
        }
        gaps.push(last - lp);
    }
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let max_gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    log::info!("spi optimality gaps: mean {mean_gap:.3e} max {max_gap:.3e}");
    let mut o = Outcome::new(
        unsafe_iters == 0 && non_monotone == 0 && below_lp == 0,
        format!(
            "{unsafe_iters} unsafe iterates, {non_monotone} cost increases, {below_lp} finals below the LP optimum; gap to LP mean {mean_gap:.3e} max {max_gap:.3e}"
        ),
        "0 / 0 / 0 on 100 instances within 1e-8, under 60 s",
    );
    o.soft.push(SoftCheck {
        name: "cost does not increase at any state between iterates".into(),
        met: state_increases == 0,
        detail: format!("{state_increases} increases over {state_checks} state comparisons"),
    });
    o.time_limit = Some(60.0);
    Ok(o)
}

pub(crate) fn epsilon_constructions() -> Result<Outcome> {
    let (mut over_c, mut over_s, mut smaller) = (0, 0, 0);
    let mut worst = f64::NEG_INFINITY;
    for (cmdp, pi0) in random_instances()? {
        let budget = constraint_budget(&cmdp, &pi0)?;
        let c = epsilon_constant(&cmdp, &pi0)?;
        let s = epsilon_state_dependent(&cmdp, &pi0)?;
        let uc = discounted_state_sum(&cmdp, &pi0, &vec![c; cmdp.n_states()]);
        let us = discounted_state_sum(&cmdp, &pi0, &s);
        worst = worst.max(uc - budget).max(us - budget);
        over_c += (uc > budget + 1e-9) as usize;
        over_s += (us > budget + 1e-9) as usize;
        smaller += (s.iter().sum::<f64>() < c * cmdp.n_states() as f64 - 1e-12) as usize;
    }
    Ok(Outcome::new(
        over_c == 0 && over_s == 0 && smaller == 0,
        format!(
            "budget exceeded by constant {over_c}, state-dependent {over_s}; state-dependent objective smaller {smaller}; worst usage − budget {worst:.2e}"
        ),
        "0 / 0 / 0 on 100 instances (budget tolerance 1e-9)",
    ))
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn random_spec(rng: &mut ChaCha8Rng, head: OutputHead, input: usize) -> MlpSpec {
    let hidden = (0..rng.random_range(1..=2)).map(|_| rng.random_range(2..=6)).collect();
    let act = [Activation::Tanh, Activation::Relu, Activation::Identity][rng.random_range(0..3)];
    MlpSpec::new(input, hidden, act, head).expect("valid random spec")
}

/// Runs `draw` until `n` smooth checks were made; returns (checks, failures, worst error).
fn fd_campaign<F>(n: usize, mut draw: F) -> Result<(usize, usize, f64)>
where
    F: FnMut() -> Result<Option<(f64, f64)>>,
{
    let (mut done, mut failed, mut worst, mut attempts) = (0, 0, 0.0f64, 0);
    while done < n && attempts < 20 * n {
        attempts += 1;
        if let Some((err, tol)) = draw()? {
            done += 1;
            worst = worst.max(err);
            failed += (err > tol) as usize;
        }
    }
    Ok((done, failed, worst))
}

pub(crate) fn gradient_integrity() -> Result<Outcome> {
    const N: usize = 120;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mlp = fd_campaign(N, || {
        let in_dim = rng.random_range(1..=4);
        let out = rng.random_range(1..=3);
        let spec = random_spec(&mut rng, OutputHead::Mean { dim: out }, in_dim);
        let params = spec.init(&mut rng, 1.0);
        let x = random_vec(&mut rng, in_dim, 1.5);
        let w = random_vec(&mut rng, out, 1.0);
        let grads = mlp_backward(&spec, &params, &x, &w)?;
        let v = random_vec(&mut rng, params.len(), 1.0);
        let analytic: f64 = grads.params.iter().zip(&v).map(|(a, b)| a * b).sum();
        let f = |p: &[f64]| spec.forward(p, &x).unwrap().iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let chk = check_directional(f, params.as_slice(), &v, analytic, 1e-5);
        Ok(chk.smooth.then_some((chk.rel_error, 1e-5)))
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let gauss = fd_campaign(N, || {
        let obs_dim = rng.random_range(1..=3);
        let act_dim = rng.random_range(1..=3);
        let (mode, head) = if rng.random_bool(0.5) {
            (LogVarMode::Free, OutputHead::Mean { dim: act_dim })
        } else {
            (LogVarMode::Head, OutputHead::MeanLogVar { dim: act_dim })
        };
        let pol = GaussianPolicy::new(random_spec(&mut rng, head, obs_dim), mode)?;
        let lv0 = rng.random_range(-1.5..0.5);
        let params = pol.init(&mut rng, 1.0, lv0);
        let x = random_vec(&mut rng, obs_dim, 1.0);
        let a = random_vec(&mut rng, act_dim, 1.5);
        let (_, g) = gaussian_logprob(&pol, &params, &x, &a)?;
        let v = random_vec(&mut rng, params.len(), 1.0);
        let analytic: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
        let f = |p: &[f64]| {
            let pv = ParamVector::new(params.layout().clone(), p.to_vec()).unwrap();
            gaussian_logprob(&pol, &pv, &x, &a).unwrap().0
        };
        let chk = check_directional(f, params.as_slice(), &v, analytic, 1e-5);
        Ok(chk.smooth.then_some((chk.rel_error, 1e-5)))
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut active = 0;
    let proj = fd_campaign(N, || {
        let obs_dim = rng.random_range(1..=3);
        let act_dim = rng.random_range(1..=3);
        let actor = DeterministicActor::new(obs_dim, act_dim, &[5], Activation::Tanh)?;
        let theta = actor.spec.init(&mut rng, 1.0);
        let baseline = actor.spec.init(&mut rng, 1.0).into_values();
        let mut qv = Critic::new(obs_dim, act_dim, &[6], Activation::Tanh, 1e-3, &mut rng)?;
        let mut qw = Critic::new(obs_dim, act_dim, &[6], Activation::Tanh, 1e-3, &mut rng)?;
        qv.params = qv.spec.init(&mut rng, 1.0);
        qw.params = qw.spec.init(&mut rng, 1.0);
        let x = random_vec(&mut rng, obs_dim, 1.0);
        let eps = rng.random_range(-0.3..0.1);
        let (g, res) = a_projection_actor_grad(&actor, theta.as_slice(), &baseline, &qv, &qw, &x, eps)?;
        let v = random_vec(&mut rng, theta.len(), 1.0);
        let analytic: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
        let f = |p: &[f64]| a_projection_objective(&actor, p, &baseline, &qv, &qw, &x, eps).unwrap();
        let chk = check_directional(f, theta.as_slice(), &v, analytic, 1e-5);
        if chk.smooth {
            active += res.active as usize;
        }
        Ok(chk.smooth.then_some((chk.rel_error, 1e-4)))
    })?;
    let ok = |r: &(usize, usize, f64)| r.0 >= 100 && r.1 == 0;
    let mut o = Outcome::new(
        ok(&mlp) && ok(&gauss) && ok(&proj),
        format!(
            "mlp_backward {}/{} worst {:.1e}; gaussian_logprob {}/{} worst {:.1e}; a_projection_actor_grad {}/{} ({} active) worst {:.1e}",
            mlp.0 - mlp.1,
            mlp.0,
            mlp.2,
            gauss.0 - gauss.1,
            gauss.0,
            gauss.2,
            proj.0 - proj.1,
            proj.0,
            active,
            proj.2
        ),
        "≥100 passing checks per operation, rel error ≤ 1e-5 (≤ 1e-4 for the projection), under 30 s",
    );
    o.time_limit = Some(30.0);
    Ok(o)
}

fn project_with_fault(a: &[f64], b: &[f64], g: &[f64], eps: f64, fault: Option<Fault>) -> Result<ProjectionResult> {
    let mut r = safety_layer_project(a, b, g, eps)?;
    if fault == Some(Fault::FlipProjectionSign) {
        r.action = a.iter().zip(g).map(|(a, g)| a + r.lambda * g).collect();
    }
    Ok(r)
}

pub(crate) fn projection_correctness(fault: Option<Fault>) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (mut infeasible, mut not_idempotent, mut off_oracle) = (0, 0, 0);
    let mut worst_oracle = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=5);
        let a = random_vec(&mut rng, n, 3.0);
        let b = random_vec(&mut rng, n, 3.0);
        let mut g = random_vec(&mut rng, n, 3.0);
        if g.iter().map(|x| x * x).sum::<f64>() < 1e-6 {
            g[0] = 1.0;
        }
        let eps = rng.random_range(-2.0..2.0);
        let r = project_with_fault(&a, &b, &g, eps, fault)?;
        let usage: f64 = g.iter().zip(&r.action).zip(&b).map(|((g, p), b)| g * (p - b)).sum();
        infeasible += (usage > eps + 1e-9) as usize;
        let again = project_with_fault(&r.action, &b, &g, eps, fault)?;
        not_idempotent += (again.lambda != 0.0 || again.action != r.action) as usize;
        let oracle = halfspace_projection(&a, &b, &g, eps);
        let dist = r.action.iter().zip(&oracle).map(|(p, o)| (p - o).abs()).fold(0.0, f64::max);
        worst_oracle = worst_oracle.max(dist);
        off_oracle += (dist > 1e-6) as usize;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut kkt_off = 0;
    let mut worst_kkt = 0.0f64;
    let mut instances = 0;
    while instances < 1000 {
        let n = rng.random_range(1..=4);
        let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let h = &m * m.transpose() + DMatrix::<f64>::identity(n, n) * 0.5;
        let gc = DVector::<f64>::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let gd = DVector::<f64>::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let eps = rng.random_range(-1.0..1.0);
        let beta = rng.random_range(0.1..5.0);
        if gd.norm() < 1e-2 {
            continue;
        }
        instances += 1;
        let hinv = h.clone().try_inverse().expect("positive definite");
        let got = theta_projection_multiplier(
            gc.as_slice(),
            gd.as_slice(),
            |v| (&hinv * DVector::from_column_slice(v)).iter().copied().collect(),
            eps,
            beta,
        )?;
        let oracle = theta_multiplier_kkt(&gc, &gd, &h, eps, beta);
        let err = (got.lambda - oracle).abs() / (1.0 + oracle.abs());
        worst_kkt = worst_kkt.max(err);
        kkt_off += (err > 1e-6) as usize;
    }
    Ok(Outcome::new(
        infeasible == 0 && not_idempotent == 0 && off_oracle == 0 && kkt_off == 0,
        format!(
            "of 10^4 projections: {infeasible} infeasible, {not_idempotent} not idempotent, {off_oracle} off the oracle (worst {worst_oracle:.1e}); of 10^3 multipliers: {kkt_off} off the KKT oracle (worst {worst_kkt:.1e})"
        ),
        "all zero; oracle tolerance 1e-6, feasibility 1e-9",
    ))
}

fn gridworld_batch(cmdp: &TabularCmdp, theta: &[f64], episodes: usize, seed: u64) -> Result<TrajectoryBatch> {
    let pol = SoftmaxPolicy::new(cmdp.n_states(), cmdp.n_actions());
    let mut env = GridworldEnv::new(cmdp.clone(), 200)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut batch = TrajectoryBatch::new();
    for e in 0..episodes as u64 {
        let steps = run_episode(&mut env, seed << 32 | e, &mut |x| {
            let a = pol.sample(theta, x, &mut rng)?;
            let lp = pol.log_prob(theta, x, &a)?;
            Ok((a, lp))
        })?;
        batch.push_episode(steps)?;
    }
    Ok(batch)
}

pub(crate) fn estimator_consistency() -> Result<Outcome> {
    const EPISODES: usize = 10_000;
    let cmdp = six_state_fixture();
    let gamma = cmdp.gamma();
    let pol = SoftmaxPolicy::new(cmdp.n_states(), cmdp.n_actions());
    let theta = vec![0.3, -0.2, 0.1, 0.4, -0.5, 0.2, 0.0, 0.6, 0.2, -0.1, 0.0, 0.0];
    let tab = pol.to_tabular(&theta)?;
    let batch = gridworld_batch(&cmdp, &theta, EPISODES, 7)?;

    let mut cosines = Vec::new();
    for lambda in [0.0, 0.5, 2.0] {
        let exact = softmax_policy_gradient(&cmdp, &tab, lambda)?;
        let (g, _, _) = lagrangian_pg_gradient(&pol, &theta, &batch, lambda, gamma)?;
        cosines.push((format!("lagrangian λ={lambda}"), cosine(&g, &exact)));
    }
    let v = policy_evaluate(&cmdp, &tab, Signal::Cost)?;
    let values: Vec<f64> = batch
        .steps()
        .iter()
        .map(|s| pol.state_index(&s.obs).map(|x| v[x]))
        .collect::<lyapunov_core::Result<_>>()?;
    let adv = gae_advantages(&batch, Signal::Cost, &values, gamma, 1.0)?;
    let cfg = SafePgConfig {
        gamma,
        ..SafePgConfig::default()
    };
    let mut params = ParamVector::new(pol.layout(), theta.clone())?;
    let step = ppo_update(&pol, &mut params, &batch, &adv, 1.0, &cfg)?;
    let exact = softmax_policy_gradient(&cmdp, &tab, 0.0)?;
    cosines.push(("ppo".to_string(), cosine(&step.gradient, &exact)));

    // Monte Carlo values through the evaluation protocol
    let mut env = GridworldEnv::new(cmdp.clone(), 200)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let summary = evaluate_policy(&mut |x| pol.sample(&theta, x, &mut rng), &mut env, EPISODES, 8, gamma)?;
    let exact_d = policy_evaluate(&cmdp, &tab, Signal::Constraint)?[cmdp.x0()];
    let exact_c = policy_evaluate(&cmdp, &tab, Signal::Cost)?[cmdp.x0()];
    let mut z = vec![
        ("D".to_string(), (summary.mean_discounted_constraint_return - exact_d) / summary.discounted_constraint_se),
        ("C".to_string(), (summary.mean_discounted_return - exact_c) / summary.discounted_return_se),
    ];
    let visit = discounted_visitation(&cmdp, &tab)?;
    for (x, exact_v) in visit.iter().enumerate() {
        if env.is_absorbing(x) {
            // absorbing states end the episode and are never observed
            continue;
        }
        let per_episode: Vec<f64> = batch
            .episodes()
            .iter()
            .map(|ep| {
                let mut disc = 1.0 - gamma;
                let mut total = 0.0;
                for t in ep.range() {
                    total += disc * batch.steps()[t].obs[x];
                    disc *= gamma;
                }
                total
            })
            .collect();
        let (m, se) = mean_se(&per_episode);
        z.push((format!("visit {x}"), if se > 0.0 { (m - exact_v) / se } else { 0.0 }));
    }
    let cos_ok = cosines.iter().all(|(_, c)| *c >= 0.99);
    let z_ok = z.iter().all(|(_, z)| z.abs() <= 3.0);
    let fmt_c: Vec<String> = cosines.iter().map(|(n, c)| format!("{n} {c:.4}")).collect();
    let max_z = z.iter().map(|(_, z)| z.abs()).fold(0.0, f64::max);
    Ok(Outcome::new(
        cos_ok && z_ok,
        format!("cosines [{}]; max |z| over {} Monte Carlo estimates {max_z:.2}", fmt_c.join(", "), z.len()),
        "cosine ≥ 0.99 at 10^4 episodes; every estimate within 3 standard errors",
    ))
}

/// Small Point-Gather configuration with the constraint cost removed.
pub fn reduction_config(algorithm: Algorithm, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvSpec::PointGather(GatherConfig::default()),
        algorithm,
        safepg: SafePgConfig {
            actor_hidden: vec![16, 16],
            critic_hidden: vec![32, 16],
            batch_size: 32,
            warmup_steps: 32,
            updates_per_iteration: 10,
            value_epochs: 3,
            value_batch: 32,
            actor_lr: if algorithm.family() == crate::Family::OnPolicy { 0.05 } else { 1e-3 },
            ..SafePgConfig::default()
        },
        iterations: 8,
        episodes_per_iteration: 4,
        eval_episodes: 3,
        seed,
        output_dir: std::env::temp_dir().join("lyap-reduction"),
        zero_constraint: true,
        record_wall_clock: false,
    }
}

pub(crate) fn reduction_identity() -> Result<Outcome> {
    let mut parts = Vec::new();
    let mut ok = true;
    for (base, safe) in [(Algorithm::Ddpg, Algorithm::Sddpg), (Algorithm::Ppo, Algorithm::Sppo)] {
        let a = train(&reduction_config(base, 5))?;
        let b = train(&reduction_config(safe, 5))?;
        let mut diff = 0.0f64;
        for (pa, pb) in a.param_trace.iter().zip(&b.param_trace) {
            for (x, y) in pa.iter().zip(pb) {
                diff = diff.max((x - y).abs());
            }
        }
        let moved = a.param_trace.first().zip(a.param_trace.last()).is_some_and(|(f, l)| f != l);
        let same_len = a.param_trace.len() == b.param_trace.len() && !a.param_trace.is_empty();
        ok &= diff <= 1e-12 && moved && same_len;
        parts.push(format!("{} vs {}: max |Δθ| {diff:.1e} over {} iterates", safe.name(), base.name(), a.param_trace.len()));
    }
    Ok(Outcome::new(ok, parts.join("; "), "max |Δθ| ≤ 1e-12 along the whole trajectory"))
}

/// Point-Gather comparison run: d0 = 2, 300 iterations, small networks.
pub fn gather_comparison_config(algorithm: Algorithm, seed: u64) -> ExperimentConfig {
    let mut gather = GatherConfig::default();
    gather.point.d0 = 2.0;
    ExperimentConfig {
        env: EnvSpec::PointGather(gather),
        algorithm,
        safepg: SafePgConfig {
            gamma: 0.99,
            actor_hidden: vec![32, 32],
            critic_hidden: vec![64, 32],
            batch_size: 64,
            warmup_steps: 300,
            updates_per_iteration: 20,
            actor_lr: if algorithm.family() == crate::Family::OnPolicy { 0.05 } else { 1e-3 },
            ..SafePgConfig::default()
        },
        iterations: 300,
        episodes_per_iteration: 5,
        eval_episodes: 10,
        seed,
        output_dir: std::env::temp_dir().join("lyap-gather"),
        zero_constraint: false,
        record_wall_clock: false,
    }
}

pub(crate) fn gather_comparison(traces: &mut Vec<TraceSeries>) -> Result<Outcome> {
    const SEEDS: [u64; 3] = [1, 2, 3];
    let algorithms = Algorithm::ALL;
    let d0 = 2.0;
    let mut safe_parts = Vec::new();
    let mut safe_ok = true;
    let mut slowest = 0.0f64;
    let mut unconstrained = Vec::new();
    let mut crossings = Vec::new();
    // mean violation fraction over the final 20% of checkpoints, per algorithm
    let mut late_violation = std::collections::BTreeMap::<&str, Vec<f64>>::new();
    for alg in algorithms {
        for seed in SEEDS {
            let started = std::time::Instant::now();
            let out = train(&gather_comparison_config(alg, seed))?;
            slowest = slowest.max(started.elapsed().as_secs_f64());
            let cons: Vec<f64> = out.rows.iter().map(|r| r.mean_constraint_return).collect();
            let ret: Vec<f64> = out.rows.iter().map(|r| r.mean_return).collect();
            let tail = &cons[cons.len() / 2..];
            let late = &out.rows[out.rows.len() - out.rows.len() / 5..];
            late_violation
                .entry(alg.name())
                .or_default()
                .push(late.iter().map(|r| r.violation_fraction).sum::<f64>() / late.len().max(1) as f64);
            match alg {
                _ if alg.variant().is_safe() && alg.variant() != Variant::Lagrangian => {
                    let frac = tail.iter().filter(|d| **d <= 1.1 * d0).count() as f64 / tail.len() as f64;
                    safe_ok &= frac >= 0.9;
                    safe_parts.push(format!("{} seed {seed}: {:.0}%", alg.name(), 100.0 * frac));
                }
                _ if alg.variant() == Variant::Unconstrained => {
                    unconstrained.push((alg.name(), seed, tail.iter().filter(|d| **d > d0).count() as f64 / tail.len() as f64));
                }
                _ => {
                    let warm = &cons[cons.len() / 10..];
                    let (mut up, mut down) = (0, 0);
                    for w in warm.windows(2) {
                        if w[0] <= d0 && w[1] > d0 {
                            up += 1;
                        }
                        if w[0] > d0 && w[1] <= d0 {
                            down += 1;
                        }
                    }
                    crossings.push((alg.name(), seed, up, down));
                }
            }
            for (metric, values) in [("mean_constraint_return", cons), ("mean_return", ret)] {
                traces.push(TraceSeries {
                    algorithm: alg.name().to_string(),
                    seed,
                    metric: metric.to_string(),
                    values,
                });
            }
        }
    }
    let mut o = Outcome::new(
        safe_ok && slowest < 600.0,
        format!(
            "share of final-half checkpoints with constraint return ≤ 1.1·d0: {}; slowest run {slowest:.0}s",
            safe_parts.join(", ")
        ),
        "≥ 90% for every safe run, each run under 10 min",
    );
    o.soft.push(SoftCheck {
        name: "unconstrained baseline exceeds d0 on ≥ 50% of final-half checkpoints".into(),
        met: unconstrained.iter().all(|(_, _, f)| *f >= 0.5),
        detail: unconstrained
            .iter()
            .map(|(a, s, f)| format!("{a} seed {s}: {:.0}%", 100.0 * f))
            .collect::<Vec<_>>()
            .join(", "),
    });
    o.soft.push(SoftCheck {
        name: "Lagrangian constraint trace crosses d0 in both directions after warmup".into(),
        met: crossings.iter().all(|(_, _, u, d)| *u >= 1 && *d >= 1),
        detail: crossings
            .iter()
            .map(|(a, s, u, d)| format!("{a} seed {s}: {u} up, {d} down"))
            .collect::<Vec<_>>()
            .join(", "),
    });
    let avg = |name: &str| late_violation.get(name).map_or(0.0, |v| v.iter().sum::<f64>() / v.len() as f64);
    let (base, proj) = (avg(Algorithm::Ddpg.name()), avg(Algorithm::SddpgAProjection.name()));
    o.soft.push(SoftCheck {
        name: "ddpg violation fraction exceeds sddpg_a_projection over the final 20% of checkpoints".into(),
        met: base > proj,
        detail: format!("ddpg {base:.3}, sddpg_a_projection {proj:.3}"),
    });
    Ok(o)
}

pub(crate) fn reproducibility() -> Result<Outcome> {
    let mut differing = Vec::new();
    for alg in Algorithm::ALL {
        let mut cfg = reduction_config(alg, 11);
        cfg.zero_constraint = false;
        cfg.iterations = 3;
        let render = || -> Result<Vec<u8>> {
            let mut w = MetricsWriter::new(Vec::new())?;
            train_with(&cfg, &mut |row| w.write(row))?;
            w.into_inner()
        };
        if render()? != render()? {
            differing.push(alg.name());
        }
    }
    Ok(Outcome::new(
        differing.is_empty(),
        if differing.is_empty() {
            format!("all {} algorithms byte-identical", Algorithm::ALL.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
        "identical metrics CSV bytes for identical config and seed",
    ))
}
