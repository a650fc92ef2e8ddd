use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use lyapunov_core::cmdp::{lp_optimal_cmdp, spi_run, TabularCmdp, TabularPolicy};
use lyapunov_harness::acceptance::{run_acceptance, AcceptanceOptions};
use lyapunov_harness::{evaluate_policy, run_experiment, Checkpoint, ExperimentConfig};

#[derive(Parser)]
#[command(name = "lyap", version, about = "Safe policy-gradient experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm from a TOML config and write metrics under the output dir.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved checkpoint on its own environment.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the acceptance criteria; exits nonzero if any fails.
    Accept {
        /// Write the full JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Comma separated criterion ids, e.g. `1,4,6`.
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<u8>>,
    },
    /// Solve a tabular CMDP given as JSON with safe policy iteration and the exact LP.
    SolveCmdp {
        #[arg(long)]
        cmdp: PathBuf,
        /// Feasible initial policy as JSON; uniform if omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let path = run_experiment(&cfg)?;
            println!("{}", path.display());
        }
        Command::Eval { checkpoint, episodes, seed } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let mut env = ckpt.config.build_env()?;
            let mut policy = ckpt.policy()?;
            let summary = evaluate_policy(&mut policy, env.as_mut(), episodes, seed, ckpt.config.safepg.gamma)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Accept { report, criteria } => {
            let opts = AcceptanceOptions {
                only: criteria,
                ..AcceptanceOptions::default()
            };
            let rep = run_acceptance(&opts);
            for line in rep.summary_lines() {
                println!("{line}");
            }
            if let Some(path) = report {
                std::fs::write(&path, rep.to_json()?)?;
            }
            if !rep.all_passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::SolveCmdp { cmdp, policy, max_iters } => {
            let model = TabularCmdp::from_json(&std::fs::read_to_string(&cmdp)?)?;
            let initial = match policy {
                Some(p) => serde_json::from_str::<TabularPolicy>(&std::fs::read_to_string(p)?)?,
                None => TabularPolicy::uniform(model.n_states(), model.n_actions()),
            };
            if initial.n_states() != model.n_states() || initial.n_actions() != model.n_actions() {
                bail!("initial policy shape does not match the CMDP");
            }
            let spi = spi_run(&model, &initial, max_iters, 1e-10)?;
            let lp = lp_optimal_cmdp(&model)?;
            let log: Vec<_> = spi
                .log
                .iter()
                .map(|it| serde_json::json!({"iteration": it.iteration, "cost": it.cost, "constraint": it.constraint}))
                .collect();
            let out = serde_json::json!({
                "spi": {"converged": spi.converged, "iterates": log, "policy": spi.policy},
                "lp": {"value": lp.value, "policy": lp.policy},
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
