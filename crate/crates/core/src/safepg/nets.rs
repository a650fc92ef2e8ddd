use rand::Rng;

use crate::diff::{soft_update, Activation, Adam, MlpSpec, MlpTape, OutputHead, ParamVector};
use crate::error::{check_dim, Result};

/// Scalar critic `Q(x, a)` (or `V(x)` when `action_dim = 0`) with a Polyak target copy.
#[derive(Debug, Clone)]
pub struct Critic {
    pub spec: MlpSpec,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub params: ParamVector,
    pub target: Vec<f64>,
    opt: Adam,
}

impl Critic {
    /// Hidden layers use the fan-in initialization; the output layer starts at zero.
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        lr: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let spec = MlpSpec::new(obs_dim + action_dim, hidden.to_vec(), activation, OutputHead::Scalar)?;
        let params = spec.init(rng, 0.0);
        let target = params.as_slice().to_vec();
        let opt = Adam::new(params.len(), lr);
        Ok(Self {
            spec,
            obs_dim,
            action_dim,
            params,
            target,
            opt,
        })
    }

    fn input(&self, obs: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        check_dim("critic observation", self.obs_dim, obs.len())?;
        check_dim("critic action", self.action_dim, action.len())?;
        let mut x = Vec::with_capacity(obs.len() + action.len());
        x.extend_from_slice(obs);
        x.extend_from_slice(action);
        Ok(x)
    }

    pub fn value(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.spec.forward(self.params.as_slice(), &self.input(obs, action)?)?[0])
    }

    pub fn target_value(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.spec.forward(&self.target, &self.input(obs, action)?)?[0])
    }

    /// `(Q(x, a), ∇_a Q(x, a))` under the online parameters.
    pub fn action_grad(&self, obs: &[f64], action: &[f64]) -> Result<(f64, Vec<f64>)> {
        let tape = self.spec.forward_tape(self.params.as_slice(), &self.input(obs, action)?)?;
        let q = tape.output()[0];
        let gin = self.spec.backward_tape(self.params.as_slice(), &tape, &[1.0], None, 1.0)?;
        Ok((q, gin[self.obs_dim..].to_vec()))
    }

    /// One Adam step on `mean ½(Q − y)²`; returns the loss before the step.
    pub fn fit<'a, I>(&mut self, samples: I) -> Result<f64>
    where
        I: IntoIterator<Item = (&'a [f64], &'a [f64], f64)>,
    {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let mut n = 0usize;
        let mut items = Vec::new();
        for (obs, action, y) in samples {
            let tape = self.spec.forward_tape(self.params.as_slice(), &self.input(obs, action)?)?;
            let err = tape.output()[0] - y;
            loss += 0.5 * err * err;
            n += 1;
            items.push((tape, err));
        }
        if n == 0 {
            return Ok(0.0);
        }
        let w = 1.0 / n as f64;
        for (tape, err) in &items {
            self.spec
                .backward_tape(self.params.as_slice(), tape, &[*err], Some(&mut grad), w)?;
        }
        self.opt.step(self.params.as_mut_slice(), &grad);
        Ok(loss * w)
    }

    pub fn soft_update_target(&mut self, tau: f64) {
        soft_update(&mut self.target, self.params.as_slice(), tau);
    }
}

/// Deterministic actor `a = tanh(net(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicActor {
    pub spec: MlpSpec,
}

impl DeterministicActor {
    pub fn new(obs_dim: usize, action_dim: usize, hidden: &[usize], activation: Activation) -> Result<Self> {
        Ok(Self {
            spec: MlpSpec::new(obs_dim, hidden.to_vec(), activation, OutputHead::Mean { dim: action_dim })?,
        })
    }

    pub fn n_params(&self) -> usize {
        self.spec.n_params()
    }

    pub fn action_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        self.spec.init(rng, 0.1)
    }

    pub fn act(&self, params: &[f64], obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.spec.forward(params, obs)?.into_iter().map(f64::tanh).collect())
    }

    pub fn forward(&self, params: &[f64], obs: &[f64]) -> Result<(MlpTape, Vec<f64>)> {
        let tape = self.spec.forward_tape(params, obs)?;
        let a = tape.output().iter().map(|z| z.tanh()).collect();
        Ok((tape, a))
    }

    /// Adds `scale · J_θ(a)ᵀ d_action` into `grad`.
    pub fn backward(
        &self,
        params: &[f64],
        tape: &MlpTape,
        action: &[f64],
        d_action: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let dz: Vec<f64> = d_action.iter().zip(action).map(|(d, a)| d * (1.0 - a * a)).collect();
        self.spec.backward_tape(params, tape, &dz, Some(grad), scale)?;
        Ok(())
    }
}
