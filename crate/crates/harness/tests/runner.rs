use lyapunov_core::cmdp::{policy_evaluate, Signal, TabularPolicy};
use lyapunov_core::envs::{six_state_fixture, Env, EnvSpec, GatherConfig, GridworldEnv, PointGather};
use lyapunov_harness::acceptance::reduction_config;
use lyapunov_harness::metrics::{read_metrics, METRICS_COLUMNS, METRICS_VERSION_LINE};
use lyapunov_harness::{evaluate_policy, run_experiment, train, Algorithm, Checkpoint, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(alg: Algorithm, dir: &std::path::Path) -> ExperimentConfig {
    let mut c = reduction_config(alg, 3);
    c.zero_constraint = false;
    c.iterations = 3;
    c.output_dir = dir.to_path_buf();
    c
}

#[test]
fn zero_iterations_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Algorithm::Sddpg, dir.path());
    c.iterations = 0;
    let path = run_experiment(&c).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text, format!("{METRICS_VERSION_LINE}\n{}\n", METRICS_COLUMNS.join(",")));
}

#[test]
fn reruns_are_byte_identical() {
    for alg in [Algorithm::SddpgAProjection, Algorithm::Sppo] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let pa = run_experiment(&small(alg, a.path())).unwrap();
        let pb = run_experiment(&small(alg, b.path())).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap(), "{}", alg.name());
        let rows = read_metrics(std::fs::File::open(&pa).unwrap()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.wall_clock.is_none()));
        let traces = |d: &tempfile::TempDir| std::fs::read(d.path().join("traces.csv")).unwrap();
        assert_eq!(traces(&a), traces(&b));
        let ca = Checkpoint::load(&a.path().join("checkpoint.json")).unwrap();
        let cb = Checkpoint::load(&b.path().join("checkpoint.json")).unwrap();
        assert_eq!((ca.actor, ca.qw, ca.epsilon), (cb.actor, cb.qw, cb.epsilon));
    }
}

#[test]
fn different_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    let a = train(&small(Algorithm::Ddpg, dir.path())).unwrap();
    let mut c = small(Algorithm::Ddpg, dir.path());
    c.seed += 1;
    let b = train(&c).unwrap();
    assert_ne!(a.param_trace, b.param_trace);
}

#[test]
fn invalid_config_fails_before_side_effects() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let mut c = small(Algorithm::Ppo, &out);
    c.eval_episodes = 0;
    assert!(run_experiment(&c).is_err());
    let mut c = small(Algorithm::Ppo, &out);
    c.env = EnvSpec::Gridworld { cmdp: None, horizon: 10 };
    assert!(run_experiment(&c).is_err());
    let mut c = small(Algorithm::Ddpg, &out);
    c.safepg.actor_hidden = vec![0];
    assert!(run_experiment(&c).is_err());
    assert!(!out.exists());
}

#[test]
fn wall_clock_column_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Algorithm::Ppo, dir.path());
    c.record_wall_clock = true;
    let rows = train(&c).unwrap().rows;
    assert!(rows.iter().all(|r| r.wall_clock.is_some_and(|w| w >= 0.0)));
}

#[test]
fn checkpoint_reproduces_final_evaluation() {
    for alg in [Algorithm::SddpgAProjection, Algorithm::SppoAProjection] {
        let dir = tempfile::tempdir().unwrap();
        let c = small(alg, dir.path());
        run_experiment(&c).unwrap();
        let rows = read_metrics(std::fs::File::open(dir.path().join("metrics.csv")).unwrap()).unwrap();
        let ckpt = Checkpoint::load(&dir.path().join("checkpoint.json")).unwrap();
        assert_eq!(ckpt.config, c);
        let mut env = c.build_env().unwrap();
        let mut pol = ckpt.policy().unwrap();
        let s = evaluate_policy(&mut pol, env.as_mut(), c.eval_episodes, c.seed, c.safepg.gamma).unwrap();
        let last = rows.last().unwrap();
        assert_eq!(s.mean_return, last.mean_return, "{}", alg.name());
        assert_eq!(s.mean_constraint_return, last.mean_constraint_return);
    }
}

#[test]
fn deterministic_env_and_policy_have_zero_variance() {
    let mut cfg = GatherConfig::default();
    cfg.point.noise_std = 0.0;
    let mut env = PointGather::new(cfg).unwrap();
    let a = evaluate_policy(&mut |_| Ok(vec![0.7, -0.3]), &mut env, 5, 9, 0.99).unwrap();
    let b = evaluate_policy(&mut |_| Ok(vec![0.7, -0.3]), &mut env, 5, 9, 0.99).unwrap();
    assert_eq!(a, b);
}

#[test]
fn random_policy_on_gather_stays_in_bounds() {
    let mut env = PointGather::new(GatherConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut total = 0.0;
    for seed in 0..200 {
        let s = evaluate_policy(
            &mut |_| Ok(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]),
            &mut env,
            1,
            seed,
            0.99,
        )
        .unwrap();
        assert!((0.0..=8.0).contains(&s.mean_constraint_return));
        total += s.mean_constraint_return;
    }
    println!("random policy: {:.3} bombs per Gather episode", total / 200.0);
}

#[test]
fn tabular_policy_matches_exact_values() {
    let cmdp = six_state_fixture();
    let pi = TabularPolicy::uniform(cmdp.n_states(), cmdp.n_actions());
    let mut env = GridworldEnv::new(cmdp.clone(), 200).unwrap();
    assert_eq!(env.action_dim(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = evaluate_policy(
        &mut |_| Ok(vec![rng.random_range(0..cmdp.n_actions()) as f64]),
        &mut env,
        20_000,
        4,
        cmdp.gamma(),
    )
    .unwrap();
    let c = policy_evaluate(&cmdp, &pi, Signal::Cost).unwrap()[cmdp.x0()];
    let d = policy_evaluate(&cmdp, &pi, Signal::Constraint).unwrap()[cmdp.x0()];
    assert!((s.mean_discounted_return - c).abs() <= 3.0 * s.discounted_return_se);
    assert!((s.mean_discounted_constraint_return - d).abs() <= 3.0 * s.discounted_constraint_se);
}

#[test]
fn shipped_configs_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let c = ExperimentConfig::load(&path).unwrap();
            c.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 3);
}
