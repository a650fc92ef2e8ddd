//! Rollout environments: point-mass Circle and Gather tasks and a tabular adapter.

mod circle;
mod gather;
mod grid;
mod point;

pub use circle::{circle_reward, point_circle_step, CircleConfig, PointCircle};
pub use gather::{point_gather_step, GatherConfig, GatherState, PointGather};
pub use grid::{gridworld_env, six_state_fixture, GridworldEnv};
pub use point::{PointConfig, PointState};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cmdp::TabularCmdp;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub cost: f64,
    /// Always `≥ 0`.
    pub constraint_cost: f64,
    /// No further steps are accepted.
    pub done: bool,
    /// The episode ended in an absorbing state (bootstrap value zero).
    pub terminal: bool,
}

pub trait Env: Send {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn d0(&self) -> f64;
    /// Resets the episode; all randomness of the episode derives from `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
    fn box_clone(&self) -> Box<dyn Env>;
}

impl Clone for Box<dyn Env> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

impl Env for Box<dyn Env> {
    fn obs_dim(&self) -> usize {
        (**self).obs_dim()
    }

    fn action_dim(&self) -> usize {
        (**self).action_dim()
    }

    fn horizon(&self) -> usize {
        (**self).horizon()
    }

    fn d0(&self) -> f64 {
        (**self).d0()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        (**self).reset(seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        (**self).step(action)
    }

    fn box_clone(&self) -> Box<dyn Env> {
        (**self).box_clone()
    }
}

pub(crate) fn episode_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Replaces every constraint cost with zero.
#[derive(Clone)]
pub struct ZeroConstraint<E> {
    pub inner: E,
}

impl<E: Env + Clone + 'static> Env for ZeroConstraint<E> {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn d0(&self) -> f64 {
        self.inner.d0()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.inner.reset(seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let mut r = self.inner.step(action)?;
        r.constraint_cost = 0.0;
        Ok(r)
    }

    fn box_clone(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}

/// Serializable environment selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum EnvSpec {
    PointCircle(CircleConfig),
    PointGather(GatherConfig),
    /// Tabular CMDP, either inline or the built-in six-state fixture.
    Gridworld {
        #[serde(default)]
        cmdp: Option<TabularCmdp>,
        #[serde(default = "default_grid_horizon")]
        horizon: usize,
    },
}

fn default_grid_horizon() -> usize {
    200
}

impl EnvSpec {
    pub fn build(&self) -> Result<Box<dyn Env>> {
        Ok(match self {
            EnvSpec::PointCircle(c) => Box::new(PointCircle::new(c.clone())?),
            EnvSpec::PointGather(c) => Box::new(PointGather::new(c.clone())?),
            EnvSpec::Gridworld { cmdp, horizon } => {
                let m = cmdp.clone().unwrap_or_else(six_state_fixture);
                Box::new(GridworldEnv::new(m, *horizon)?)
            }
        })
    }

    /// Same spec with the constraint threshold replaced.
    pub fn with_d0(&self, d0: f64) -> Self {
        let mut s = self.clone();
        match &mut s {
            EnvSpec::PointCircle(c) => c.point.d0 = d0,
            EnvSpec::PointGather(c) => c.point.d0 = d0,
            EnvSpec::Gridworld { cmdp, .. } => {
                *cmdp = Some(cmdp.take().unwrap_or_else(six_state_fixture).with_d0(d0));
            }
        }
        s
    }
}
