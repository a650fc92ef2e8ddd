//! Saved policies: enough state to rebuild the evaluation-time policy.

use std::path::Path;

use lyapunov_core::diff::ParamVector;
use lyapunov_core::safepg::{DdpgAgent, PpoAgent};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Family};
use crate::error::{HarnessError, Result};
use crate::seeds::{substream, Substream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub actor: ParamVector,
    /// Safety-layer state: baseline actor, constraint critic and budget.
    pub baseline: Vec<f64>,
    pub qw: ParamVector,
    pub epsilon: f64,
}

pub type PolicyFn = Box<dyn FnMut(&[f64]) -> lyapunov_core::Result<Vec<f64>>>;

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Noise-free policy (mean action, safety layer applied).
    pub fn policy(&self) -> Result<PolicyFn> {
        let cfg = &self.config;
        let env = cfg.build_env()?;
        let mut rng = substream(cfg.seed, Substream::Init);
        let (obs, act, d0) = (env.obs_dim(), env.action_dim(), env.d0());
        let variant = cfg.algorithm.variant();
        let mismatch = || HarnessError::Config("checkpoint parameters do not match the network layout".into());
        Ok(match cfg.algorithm.family() {
            Family::OffPolicy => {
                let mut agent = DdpgAgent::new(cfg.safepg.clone(), variant, obs, act, d0, &mut rng)?;
                if agent.actor_params.len() != self.actor.len() || agent.qw.params.len() != self.qw.len() {
                    return Err(mismatch());
                }
                agent.actor_params = self.actor.clone();
                agent.baseline = self.baseline.clone();
                agent.qw.params = self.qw.clone();
                agent.epsilon = self.epsilon;
                Box::new(move |x: &[f64]| Ok(agent.act(x, None)?.0))
            }
            Family::OnPolicy => {
                let mut agent = PpoAgent::new(cfg.safepg.clone(), variant, obs, act, d0, &mut rng)?;
                if agent.params.len() != self.actor.len() || agent.qw.params.len() != self.qw.len() {
                    return Err(mismatch());
                }
                agent.params = self.actor.clone();
                agent.baseline = self.baseline.clone();
                agent.qw.params = self.qw.clone();
                agent.epsilon = self.epsilon;
                Box::new(move |x: &[f64]| Ok(agent.act(x, None)?.0))
            }
        })
    }
}
