use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::kl::kl_diag_gaussian;
use super::mlp::{MlpSpec, MlpTape, OutputHead};
use super::params::{ParamLayout, ParamVector};
use super::policy::StochasticPolicy;
use crate::error::{check_dim, check_finite, Error, Result};

pub const LOG_VAR_MIN: f64 = -5.0;
pub const LOG_VAR_MAX: f64 = 2.0;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogVarMode {
    /// State-independent vector appended after the network parameters.
    Free,
    /// Second half of a `MeanLogVar` network head.
    Head,
}

/// Diagonal Gaussian policy over unbounded pre-actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub net: MlpSpec,
    pub log_var: LogVarMode,
    pub log_var_min: f64,
    pub log_var_max: f64,
}

/// Mean and clamped log-variance at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDist {
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
    /// Components whose raw log-variance hit the clamp (zero gradient).
    pub clamped: Vec<bool>,
}

impl GaussianDist {
    pub fn std(&self) -> Vec<f64> {
        self.log_var.iter().map(|lv| (0.5 * lv).exp()).collect()
    }

    pub fn log_prob(&self, action: &[f64]) -> f64 {
        let mut lp = 0.0;
        for i in 0..self.mean.len() {
            let z = action[i] - self.mean[i];
            lp -= 0.5 * (z * z * (-self.log_var[i]).exp() + self.log_var[i] + LN_2PI);
        }
        lp
    }

    /// `(∂ log p/∂ mean, ∂ log p/∂ log_var)`, the latter zeroed where clamped.
    pub fn log_prob_partials(&self, action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.mean.len();
        let mut dm = vec![0.0; n];
        let mut dlv = vec![0.0; n];
        for i in 0..n {
            let inv_var = (-self.log_var[i]).exp();
            let z = action[i] - self.mean[i];
            dm[i] = z * inv_var;
            if !self.clamped[i] {
                dlv[i] = 0.5 * (z * z * inv_var - 1.0);
            }
        }
        (dm, dlv)
    }
}

impl GaussianPolicy {
    pub fn new(net: MlpSpec, log_var: LogVarMode) -> Result<Self> {
        net.validate()?;
        match (log_var, net.head) {
            (LogVarMode::Free, OutputHead::Mean { .. }) | (LogVarMode::Head, OutputHead::MeanLogVar { .. }) => {}
            _ => {
                return Err(Error::InvalidArgument(
                    "free log-variance needs a Mean head, head log-variance needs a MeanLogVar head".into(),
                ))
            }
        }
        Ok(Self {
            net,
            log_var,
            log_var_min: LOG_VAR_MIN,
            log_var_max: LOG_VAR_MAX,
        })
    }

    pub fn layout(&self) -> ParamLayout {
        let mut l = self.net.layout();
        if self.log_var == LogVarMode::Free {
            l.push("log_var", vec![self.action_dim()]);
        }
        l
    }

    /// Network initialized with [`MlpSpec::init`]; the free log-variance (or the
    /// log-variance head bias) is set to `init_log_var`.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R, output_scale: f64, init_log_var: f64) -> ParamVector {
        let net = self.net.init(rng, output_scale);
        let k = self.action_dim();
        let mut values = net.into_values();
        match self.log_var {
            LogVarMode::Free => values.extend(std::iter::repeat_n(init_log_var, k)),
            LogVarMode::Head => {
                let n = values.len();
                values[n - k..].iter_mut().for_each(|b| *b = init_log_var);
            }
        }
        ParamVector::new(self.layout(), values).expect("layout matches parameter count")
    }

    fn net_params<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[..self.net.n_params()]
    }

    fn eval(&self, params: &[f64], obs: &[f64]) -> Result<(MlpTape, GaussianDist)> {
        check_dim("gaussian policy parameters", self.n_params(), params.len())?;
        let tape = self.net.forward_tape(self.net_params(params), obs)?;
        let k = self.action_dim();
        let out = tape.output();
        let raw_lv: Vec<f64> = match self.log_var {
            LogVarMode::Free => params[self.net.n_params()..].to_vec(),
            LogVarMode::Head => out[k..2 * k].to_vec(),
        };
        let clamped = raw_lv.iter().map(|v| *v < self.log_var_min || *v > self.log_var_max).collect();
        let log_var = raw_lv.iter().map(|v| v.clamp(self.log_var_min, self.log_var_max)).collect();
        let dist = GaussianDist {
            mean: out[..k].to_vec(),
            log_var,
            clamped,
        };
        Ok((tape, dist))
    }

    pub fn distribution(&self, params: &[f64], obs: &[f64]) -> Result<GaussianDist> {
        Ok(self.eval(params, obs)?.1)
    }

    fn backprop(
        &self,
        params: &[f64],
        tape: &MlpTape,
        d_mean: &[f64],
        d_log_var: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let n_net = self.net.n_params();
        let (g_net, g_lv) = grad.split_at_mut(n_net);
        let out_grad: Vec<f64> = match self.log_var {
            LogVarMode::Free => {
                for (g, d) in g_lv.iter_mut().zip(d_log_var) {
                    *g += scale * d;
                }
                d_mean.to_vec()
            }
            LogVarMode::Head => d_mean.iter().chain(d_log_var).copied().collect(),
        };
        self.net.backward_tape(self.net_params(params), tape, &out_grad, Some(g_net), scale)?;
        Ok(())
    }

    /// Adds `scale * ∇θ f` where `f` depends on the policy only through the
    /// mean and clamped log-variance at `obs`, with partials `d_mean`, `d_log_var`.
    /// Partials for clamped log-variance components are ignored.
    pub fn backward_dist(
        &self,
        params: &[f64],
        obs: &[f64],
        d_mean: &[f64],
        d_log_var: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        check_dim("gaussian gradient", self.n_params(), grad.len())?;
        let (tape, dist) = self.eval(params, obs)?;
        let dlv: Vec<f64> = d_log_var
            .iter()
            .zip(&dist.clamped)
            .map(|(d, c)| if *c { 0.0 } else { *d })
            .collect();
        self.backprop(params, &tape, d_mean, &dlv, scale, grad)
    }
}

impl StochasticPolicy for GaussianPolicy {
    fn n_params(&self) -> usize {
        self.net.n_params()
            + match self.log_var {
                LogVarMode::Free => self.action_dim(),
                LogVarMode::Head => 0,
            }
    }

    fn obs_dim(&self) -> usize {
        self.net.input_dim
    }

    fn action_dim(&self) -> usize {
        match self.net.head {
            OutputHead::Scalar => 1,
            OutputHead::Mean { dim } | OutputHead::MeanLogVar { dim } => dim,
        }
    }

    fn log_prob(&self, params: &[f64], obs: &[f64], action: &[f64]) -> Result<f64> {
        check_dim("gaussian action", self.action_dim(), action.len())?;
        Ok(self.distribution(params, obs)?.log_prob(action))
    }

    fn log_prob_grad(&self, params: &[f64], obs: &[f64], action: &[f64], scale: f64, grad: &mut [f64]) -> Result<f64> {
        check_dim("gaussian action", self.action_dim(), action.len())?;
        check_dim("gaussian gradient", self.n_params(), grad.len())?;
        let (tape, dist) = self.eval(params, obs)?;
        let (dm, dlv) = dist.log_prob_partials(action);
        self.backprop(params, &tape, &dm, &dlv, scale, grad)?;
        Ok(dist.log_prob(action))
    }

    fn sample(&self, params: &[f64], obs: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let dist = self.distribution(params, obs)?;
        Ok(dist
            .mean
            .iter()
            .zip(dist.std())
            .map(|(m, s)| {
                let z: f64 = rng.sample(StandardNormal);
                m + s * z
            })
            .collect())
    }

    fn mode(&self, params: &[f64], obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.distribution(params, obs)?.mean)
    }

    fn kl(&self, old: &[f64], new: &[f64], obs: &[f64]) -> Result<f64> {
        let a = self.distribution(old, obs)?;
        let b = self.distribution(new, obs)?;
        kl_diag_gaussian(&a.mean, &a.std(), &b.mean, &b.std())
    }
}

/// Log-density of `action` and its gradient with respect to all policy parameters.
pub fn gaussian_logprob(
    policy: &GaussianPolicy,
    params: &ParamVector,
    state: &[f64],
    action: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_finite("gaussian state", state)?;
    check_finite("gaussian action", action)?;
    check_finite("gaussian parameters", params.as_slice())?;
    let mut g = vec![0.0; policy.n_params()];
    let lp = policy.log_prob_grad(params.as_slice(), state, action, 1.0, &mut g)?;
    Ok((lp, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::mlp::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn free_policy(obs: usize, dim: usize) -> GaussianPolicy {
        let net = MlpSpec::new(obs, vec![4], Activation::Tanh, OutputHead::Mean { dim }).unwrap();
        GaussianPolicy::new(net, LogVarMode::Free).unwrap()
    }

    #[test]
    fn unit_variance_at_mean() {
        let pol = free_policy(2, 2);
        let p = ParamVector::zeros(pol.layout());
        let (lp, _) = gaussian_logprob(&pol, &p, &[0.5, 0.1], &[0.0, 0.0]).unwrap();
        assert!((lp + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn doubling_std_lowers_density() {
        let pol = free_policy(1, 3);
        let p = ParamVector::zeros(pol.layout());
        let mut q = p.clone();
        let n = q.len();
        // log_var += 2 ln 2 doubles the standard deviation
        q.as_mut_slice()[n - 3..].iter_mut().for_each(|v| *v = 2.0 * 2f64.ln());
        let a = pol.log_prob(p.as_slice(), &[0.0], &[0.0; 3]).unwrap();
        let b = pol.log_prob(q.as_slice(), &[0.0], &[0.0; 3]).unwrap();
        assert!((a - b - 3.0 * 2f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn clamped_log_var_has_no_gradient() {
        let pol = free_policy(1, 1);
        let mut p = ParamVector::zeros(pol.layout());
        let n = p.len();
        p.as_mut_slice()[n - 1] = 4.0;
        let (_, g) = gaussian_logprob(&pol, &p, &[0.0], &[1.3]).unwrap();
        assert_eq!(g[n - 1], 0.0);
        let d = pol.distribution(p.as_slice(), &[0.0]).unwrap();
        assert_eq!(d.log_var, vec![LOG_VAR_MAX]);
        assert!(d.std()[0] > 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        let pol = free_policy(1, 1);
        let p = ParamVector::zeros(pol.layout());
        assert!(gaussian_logprob(&pol, &p, &[f64::NAN], &[0.0]).is_err());
        assert!(gaussian_logprob(&pol, &p, &[0.0], &[f64::INFINITY]).is_err());
    }

    #[test]
    fn head_mode_requires_matching_head() {
        let net = MlpSpec::new(1, vec![2], Activation::Tanh, OutputHead::Mean { dim: 1 }).unwrap();
        assert!(GaussianPolicy::new(net, LogVarMode::Head).is_err());
    }

    #[test]
    fn sample_mean_and_spread() {
        let pol = free_policy(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = pol.init(&mut rng, 1.0, (0.25f64).ln());
        let mean = pol.mode(p.as_slice(), &[0.2]).unwrap()[0];
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| pol.sample(p.as_slice(), &[0.2], &mut rng).unwrap()[0]).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        assert!((m - mean).abs() < 3.0 * 0.5 / (n as f64).sqrt());
        assert!((v - 0.25).abs() < 0.02);
    }
}
