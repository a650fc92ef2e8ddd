//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use lyapunov_core::envs::{Env, EnvSpec, ZeroConstraint};
use lyapunov_core::safepg::{SafePgConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Deterministic actor with replay (DDPG and its safe variants).
    OffPolicy,
    /// Gaussian actor trained on fresh batches (PPO and its safe variants).
    OnPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ddpg,
    DdpgLagrangian,
    Sddpg,
    SddpgAProjection,
    Ppo,
    PpoLagrangian,
    Sppo,
    SppoAProjection,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Ddpg,
        Algorithm::DdpgLagrangian,
        Algorithm::Sddpg,
        Algorithm::SddpgAProjection,
        Algorithm::Ppo,
        Algorithm::PpoLagrangian,
        Algorithm::Sppo,
        Algorithm::SppoAProjection,
    ];

    pub fn family(self) -> Family {
        match self {
            Algorithm::Ddpg | Algorithm::DdpgLagrangian | Algorithm::Sddpg | Algorithm::SddpgAProjection => {
                Family::OffPolicy
            }
            _ => Family::OnPolicy,
        }
    }

    pub fn variant(self) -> Variant {
        match self {
            Algorithm::Ddpg | Algorithm::Ppo => Variant::Unconstrained,
            Algorithm::DdpgLagrangian | Algorithm::PpoLagrangian => Variant::Lagrangian,
            Algorithm::Sddpg | Algorithm::Sppo => Variant::ThetaProjection,
            Algorithm::SddpgAProjection | Algorithm::SppoAProjection => Variant::AProjection,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ddpg => "ddpg",
            Algorithm::DdpgLagrangian => "ddpg_lagrangian",
            Algorithm::Sddpg => "sddpg",
            Algorithm::SddpgAProjection => "sddpg_a_projection",
            Algorithm::Ppo => "ppo",
            Algorithm::PpoLagrangian => "ppo_lagrangian",
            Algorithm::Sppo => "sppo",
            Algorithm::SppoAProjection => "sppo_a_projection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub safepg: SafePgConfig,
    /// Zero iterations produce a header-only metrics file.
    pub iterations: usize,
    pub episodes_per_iteration: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Replace every constraint cost by zero.
    #[serde(default)]
    pub zero_constraint: bool,
    /// Fill the wall_clock column. Off by default because it breaks byte-level reproducibility.
    #[serde(default)]
    pub record_wall_clock: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        if self.episodes_per_iteration == 0 {
            return Err(HarnessError::Config("episodes_per_iteration must be positive".into()));
        }
        if self.eval_episodes == 0 {
            return Err(HarnessError::Config("eval_episodes must be positive".into()));
        }
        self.safepg
            .validate()
            .map_err(|e| HarnessError::Config(format!("safepg: {e}")))?;
        if matches!(self.env, EnvSpec::Gridworld { .. }) {
            return Err(HarnessError::Config(format!(
                "{} needs a continuous action space; gridworld is only used by the exact tabular tools",
                self.algorithm.name()
            )));
        }
        self.build_env().map_err(|e| HarnessError::Config(format!("env: {e}")))?;
        Ok(())
    }

    pub fn build_env(&self) -> Result<Box<dyn Env>> {
        let env = self.env.build()?;
        Ok(if self.zero_constraint {
            Box::new(ZeroConstraint { inner: env })
        } else {
            env
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
algorithm = "sddpg_a_projection"
iterations = 3
episodes_per_iteration = 2
eval_episodes = 4
seed = 7

[env]
id = "point_gather"
n_bombs = 4

[env.point]
d0 = 2.0

[safepg]
actor_hidden = [16]
critic_hidden = [16]
"#;

    #[test]
    fn parses_nested_toml() {
        let c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.algorithm, Algorithm::SddpgAProjection);
        match &c.env {
            EnvSpec::PointGather(g) => {
                assert_eq!(g.n_bombs, 4);
                assert_eq!(g.point.horizon, 15);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(c.safepg.actor_hidden, vec![16]);
        c.validate().unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_counts() {
        assert!(ExperimentConfig::from_toml_str(&format!("{SAMPLE}\nbogus = 1")).is_err());
        let mut c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        c.eval_episodes = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        c.safepg.tighten_delta = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn family_and_variant() {
        for a in Algorithm::ALL {
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(json, format!("\"{}\"", a.name()));
        }
        assert_eq!(Algorithm::Sppo.family(), Family::OnPolicy);
        assert_eq!(Algorithm::Sddpg.variant(), Variant::ThetaProjection);
    }
}
