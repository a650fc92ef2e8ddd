use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shared point-mass settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointConfig {
    pub horizon: usize,
    pub d0: f64,
    pub dt: f64,
    /// Standard deviation of both action and observation noise.
    pub noise_std: f64,
    /// Acceleration produced by a unit action.
    pub action_gain: f64,
    pub max_speed: f64,
}

impl Default for PointConfig {
    fn default() -> Self {
        Self {
            horizon: 65,
            d0: 7.0,
            dt: 0.1,
            noise_std: 0.1,
            action_gain: 10.0,
            max_speed: 5.0,
        }
    }
}

impl PointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("episode length must be positive".into()));
        }
        if !(self.d0 >= 0.0) {
            return Err(Error::InvalidArgument("d0 must be nonnegative".into()));
        }
        if !(self.dt > 0.0 && self.noise_std >= 0.0 && self.action_gain > 0.0 && self.max_speed > 0.0) {
            return Err(Error::InvalidArgument("point dynamics constants must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointState {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
}

impl PointState {
    pub fn new(pos: [f64; 2], vel: [f64; 2]) -> Self {
        Self { pos, vel }
    }

    /// Double-integrator update with speed clamp. `action` is clamped to `[−1, 1]²`
    /// before noise and again after.
    pub fn integrate<R: Rng + ?Sized>(&mut self, action: &[f64], cfg: &PointConfig, rng: &mut R) {
        let mut acc = [0.0; 2];
        for i in 0..2 {
            let a = action.get(i).copied().unwrap_or(0.0);
            let a = if a.is_finite() { a.clamp(-1.0, 1.0) } else { 0.0 };
            let noise: f64 = if cfg.noise_std > 0.0 {
                cfg.noise_std * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            acc[i] = cfg.action_gain * (a + noise).clamp(-1.0, 1.0);
        }
        for i in 0..2 {
            self.vel[i] += acc[i] * cfg.dt;
        }
        let speed = (self.vel[0].powi(2) + self.vel[1].powi(2)).sqrt();
        if speed > cfg.max_speed {
            let k = cfg.max_speed / speed;
            self.vel[0] *= k;
            self.vel[1] *= k;
        }
        for i in 0..2 {
            self.pos[i] += self.vel[i] * cfg.dt;
        }
    }

    /// `[x, y, dx, dy]` with observation noise, positions divided by `pos_scale`
    /// and velocities by the speed limit.
    pub fn observe<R: Rng + ?Sized>(&self, cfg: &PointConfig, pos_scale: f64, rng: &mut R) -> Vec<f64> {
        let mut noise = || -> f64 {
            if cfg.noise_std > 0.0 {
                cfg.noise_std * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            }
        };
        vec![
            (self.pos[0] + noise()) / pos_scale,
            (self.pos[1] + noise()) / pos_scale,
            (self.vel[0] + noise()) / cfg.max_speed,
            (self.vel[1] + noise()) / cfg.max_speed,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_double_integrator() {
        let cfg = PointConfig {
            noise_std: 0.0,
            ..PointConfig::default()
        };
        let mut s = PointState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        s.integrate(&[1.0, -0.5], &cfg, &mut rng);
        assert!((s.vel[0] - 1.0).abs() < 1e-12 && (s.vel[1] + 0.5).abs() < 1e-12);
        assert!((s.pos[0] - 0.1).abs() < 1e-12 && (s.pos[1] + 0.05).abs() < 1e-12);
    }

    #[test]
    fn action_and_speed_are_clamped() {
        let cfg = PointConfig {
            noise_std: 0.0,
            ..PointConfig::default()
        };
        let mut s = PointState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        s.integrate(&[7.0, 0.0], &cfg, &mut rng);
        assert!((s.vel[0] - 1.0).abs() < 1e-12);
        for _ in 0..100 {
            s.integrate(&[1.0, 1.0], &cfg, &mut rng);
        }
        let speed = (s.vel[0].powi(2) + s.vel[1].powi(2)).sqrt();
        assert!(speed <= cfg.max_speed + 1e-12);
    }
}
