use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use super::point::{PointConfig, PointState};
use super::{episode_rng, Env, StepResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatherConfig {
    /// Keys given here override the Gather defaults, not the bare point-mass ones.
    #[serde(deserialize_with = "point_over_gather_defaults")]
    pub point: PointConfig,
    pub n_apples: usize,
    pub n_bombs: usize,
    /// The arena is `[−arena_half, arena_half]²`.
    pub arena_half: f64,
    pub touch_radius: f64,
    /// No object is placed within this distance of the origin.
    pub spawn_free_radius: f64,
    pub sensor_bins: usize,
    pub sensor_range: f64,
    pub apple_reward: f64,
    pub bomb_penalty: f64,
}

fn point_over_gather_defaults<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<PointConfig, D::Error> {
    use serde::de::Error as _;
    let overrides = serde_json::Map::<String, serde_json::Value>::deserialize(d)?;
    let mut merged = serde_json::to_value(GatherConfig::default().point).map_err(D::Error::custom)?;
    if let Some(map) = merged.as_object_mut() {
        map.extend(overrides);
    }
    serde_json::from_value(merged).map_err(D::Error::custom)
}

impl Default for GatherConfig {
    fn default() -> Self {
        Self {
            point: PointConfig {
                horizon: 15,
                d0: 2.0,
                ..PointConfig::default()
            },
            n_apples: 2,
            n_bombs: 8,
            arena_half: 5.0,
            touch_radius: 0.4,
            spawn_free_radius: 1.0,
            sensor_bins: 8,
            sensor_range: 6.0,
            apple_reward: 10.0,
            bomb_penalty: 10.0,
        }
    }
}

impl GatherConfig {
    pub fn validate(&self) -> Result<()> {
        self.point.validate()?;
        if !(self.arena_half > 0.0 && self.touch_radius > 0.0 && self.sensor_range > 0.0) || self.sensor_bins == 0 {
            return Err(Error::InvalidArgument("gather geometry must be positive".into()));
        }
        if !(self.spawn_free_radius >= 0.0) || self.spawn_free_radius >= self.arena_half {
            return Err(Error::InvalidArgument("spawn-free disk must fit inside the arena".into()));
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        4 + 2 * self.sensor_bins
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GatherState {
    pub point: PointState,
    pub apples: Vec<[f64; 2]>,
    pub bombs: Vec<[f64; 2]>,
}

impl GatherState {
    /// Agent at rest at the origin; objects uniform in the arena outside the spawn-free disk.
    pub fn random<R: Rng + ?Sized>(cfg: &GatherConfig, rng: &mut R) -> Self {
        let mut place = || loop {
            let p = [
                rng.random_range(-cfg.arena_half..cfg.arena_half),
                rng.random_range(-cfg.arena_half..cfg.arena_half),
            ];
            if (p[0] * p[0] + p[1] * p[1]).sqrt() > cfg.spawn_free_radius {
                return p;
            }
        };
        let apples = (0..cfg.n_apples).map(|_| place()).collect();
        let bombs = (0..cfg.n_bombs).map(|_| place()).collect();
        Self {
            point: PointState::default(),
            apples,
            bombs,
        }
    }
}

fn take_touched(objects: &mut Vec<[f64; 2]>, pos: [f64; 2], radius: f64) -> usize {
    let before = objects.len();
    objects.retain(|o| ((o[0] - pos[0]).powi(2) + (o[1] - pos[1]).powi(2)).sqrt() > radius);
    before - objects.len()
}

/// Moves the agent, removes touched objects and returns `(cost, constraint cost)`.
pub fn point_gather_step<R: Rng + ?Sized>(
    state: &mut GatherState,
    action: &[f64],
    cfg: &GatherConfig,
    rng: &mut R,
) -> (f64, f64) {
    let p = &mut state.point;
    p.integrate(action, &cfg.point, rng);
    for i in 0..2 {
        if p.pos[i].abs() > cfg.arena_half {
            p.pos[i] = p.pos[i].clamp(-cfg.arena_half, cfg.arena_half);
            p.vel[i] = 0.0;
        }
    }
    let pos = p.pos;
    let apples = take_touched(&mut state.apples, pos, cfg.touch_radius);
    let bombs = take_touched(&mut state.bombs, pos, cfg.touch_radius);
    let cost = -cfg.apple_reward * apples as f64 + cfg.bomb_penalty * bombs as f64;
    (cost, bombs as f64)
}

fn sensors(state: &GatherState, cfg: &GatherConfig) -> Vec<f64> {
    let bins = cfg.sensor_bins;
    let mut out = vec![0.0f64; 2 * bins];
    let pos = state.point.pos;
    for (k, objs) in [&state.apples, &state.bombs].into_iter().enumerate() {
        for o in objs {
            let (dx, dy) = (o[0] - pos[0], o[1] - pos[1]);
            let dist = (dx * dx + dy * dy).sqrt();
            let strength = 1.0 - dist / cfg.sensor_range;
            if strength <= 0.0 {
                continue;
            }
            let angle = dy.atan2(dx).rem_euclid(std::f64::consts::TAU);
            let bin = ((angle / std::f64::consts::TAU * bins as f64) as usize).min(bins - 1);
            let slot = &mut out[k * bins + bin];
            *slot = slot.max(strength);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct PointGather {
    cfg: GatherConfig,
    state: GatherState,
    t: usize,
    rng: ChaCha8Rng,
}

impl PointGather {
    pub fn new(cfg: GatherConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            state: GatherState::default(),
            t: 0,
            rng: episode_rng(0),
        })
    }

    pub fn config(&self) -> &GatherConfig {
        &self.cfg
    }

    pub fn state(&self) -> &GatherState {
        &self.state
    }

    pub fn set_state(&mut self, state: GatherState) {
        self.state = state;
    }

    fn observe(&mut self) -> Vec<f64> {
        let mut obs = self.state.point.observe(&self.cfg.point, self.cfg.arena_half, &mut self.rng);
        obs.extend(sensors(&self.state, &self.cfg));
        obs
    }
}

impl Env for PointGather {
    fn obs_dim(&self) -> usize {
        self.cfg.obs_dim()
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
        self.state = GatherState::random(&self.cfg, &mut self.rng);
        self.t = 0;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.t >= self.cfg.point.horizon {
            return Err(Error::EpisodeDone);
        }
        let (cost, constraint_cost) = point_gather_step(&mut self.state, action, &self.cfg, &mut self.rng);
        self.t += 1;
        let done = self.t >= self.cfg.point.horizon;
        Ok(StepResult {
            obs: self.observe(),
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
