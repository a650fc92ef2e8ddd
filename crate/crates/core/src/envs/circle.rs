use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::point::{PointConfig, PointState};
use super::{episode_rng, Env, StepResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircleConfig {
    pub point: PointConfig,
    pub radius: f64,
    /// Constraint cost is paid while `|x|` exceeds this.
    pub x_limit: f64,
}

impl Default for CircleConfig {
    fn default() -> Self {
        Self {
            point: PointConfig::default(),
            radius: 15.0,
            x_limit: 2.5,
        }
    }
}

/// Counter-clockwise speed around the origin, discounted by distance from the target circle.
pub fn circle_reward(state: &PointState, radius: f64) -> f64 {
    let [x, y] = state.pos;
    let [dx, dy] = state.vel;
    (-dx * y + dy * x) / (1.0 + ((x * x + y * y).sqrt() - radius).abs())
}

/// Costs are charged on the state the action is taken from; the state then advances.
pub fn point_circle_step<R: Rng + ?Sized>(
    state: &mut PointState,
    action: &[f64],
    cfg: &CircleConfig,
    rng: &mut R,
) -> (f64, f64) {
    let cost = -circle_reward(state, cfg.radius);
    let constraint_cost = if state.pos[0].abs() > cfg.x_limit { 1.0 } else { 0.0 };
    state.integrate(action, &cfg.point, rng);
    (cost, constraint_cost)
}

#[derive(Debug, Clone)]
pub struct PointCircle {
    cfg: CircleConfig,
    state: PointState,
    t: usize,
    rng: ChaCha8Rng,
}

impl PointCircle {
    pub fn new(cfg: CircleConfig) -> Result<Self> {
        cfg.point.validate()?;
        Ok(Self {
            cfg,
            state: PointState::default(),
            t: 0,
            rng: episode_rng(0),
        })
    }

    pub fn state(&self) -> &PointState {
        &self.state
    }

    pub fn set_state(&mut self, state: PointState) {
        self.state = state;
    }
}

impl Env for PointCircle {
    fn obs_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.cfg.point.horizon
    }

    fn d0(&self) -> f64 {
        self.cfg.point.d0
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = episode_rng(seed);
        self.state = PointState::default();
        self.t = 0;
        self.state.observe(&self.cfg.point, self.cfg.radius, &mut self.rng)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.t >= self.cfg.point.horizon {
            return Err(Error::EpisodeDone);
        }
        let (cost, constraint_cost) = point_circle_step(&mut self.state, action, &self.cfg, &mut self.rng);
        self.t += 1;
        let done = self.t >= self.cfg.point.horizon;
        Ok(StepResult {
            obs: self.state.observe(&self.cfg.point, self.cfg.radius, &mut self.rng),
            cost,
            constraint_cost,
            done,
            terminal: done,
        })
    }

    fn box_clone(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}
