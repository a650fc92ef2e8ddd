use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamLayout, ParamVector};
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputHead {
    Scalar,
    Mean { dim: usize },
    /// Output is `[mean (dim), log_var (dim)]`.
    MeanLogVar { dim: usize },
}

impl OutputHead {
    pub fn output_dim(self) -> usize {
        match self {
            OutputHead::Scalar => 1,
            OutputHead::Mean { dim } => dim,
            OutputHead::MeanLogVar { dim } => 2 * dim,
        }
    }
}

/// Fully connected network: hidden layers share one activation, the output layer is linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub head: OutputHead,
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct MlpTape {
    acts: Vec<Vec<f64>>,
}

impl MlpTape {
    pub fn input(&self) -> &[f64] {
        &self.acts[0]
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("tape has at least input and output")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, activation: Activation, head: OutputHead) -> Result<Self> {
        let spec = Self {
            input_dim,
            hidden,
            activation,
            head,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::InvalidArgument("an MLP needs at least one hidden layer".into()));
        }
        if self.input_dim == 0 || self.output_dim() == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidArgument("layer sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.head.output_dim()
    }

    /// `[input, hidden..., output]`
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.hidden.len() + 2);
        s.push(self.input_dim);
        s.extend_from_slice(&self.hidden);
        s.push(self.output_dim());
        s
    }

    pub fn n_params(&self) -> usize {
        self.sizes().windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    /// Per layer: weight `[out, in]` row-major, then bias `[out]`.
    pub fn layout(&self) -> ParamLayout {
        let mut l = ParamLayout::new();
        for (i, w) in self.sizes().windows(2).enumerate() {
            l.push(format!("layer{i}.weight"), vec![w[1], w[0]]);
            l.push(format!("layer{i}.bias"), vec![w[1]]);
        }
        l
    }

    /// Uniform `±1/sqrt(fan_in)` for every weight and bias; the output layer is
    /// further multiplied by `output_scale`.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R, output_scale: f64) -> ParamVector {
        let sizes = self.sizes();
        let n_layers = sizes.len() - 1;
        let mut values = Vec::with_capacity(self.n_params());
        for (i, w) in sizes.windows(2).enumerate() {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let scale = if i + 1 == n_layers { output_scale } else { 1.0 };
            for _ in 0..(w[0] * w[1] + w[1]) {
                values.push(scale * rng.random_range(-bound..=bound));
            }
        }
        ParamVector::new(self.layout(), values).expect("layout matches parameter count")
    }

    fn check(&self, params: &[f64], input: &[f64]) -> Result<()> {
        check_dim("mlp parameters", self.n_params(), params.len())?;
        check_dim("mlp input", self.input_dim, input.len())
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        self.check(params, input)?;
        let sizes = self.sizes();
        let n_layers = sizes.len() - 1;
        let mut x = input.to_vec();
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let y = affine(&params[off..off + n_in * n_out + n_out], &x, n_in, n_out);
            off += n_in * n_out + n_out;
            x = if l + 1 < n_layers {
                y.into_iter().map(|z| self.activation.apply(z)).collect()
            } else {
                y
            };
        }
        Ok(x)
    }

    pub fn forward_tape(&self, params: &[f64], input: &[f64]) -> Result<MlpTape> {
        self.check(params, input)?;
        let sizes = self.sizes();
        let n_layers = sizes.len() - 1;
        let mut acts = Vec::with_capacity(sizes.len());
        acts.push(input.to_vec());
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let mut y = affine(&params[off..off + n_in * n_out + n_out], &acts[l], n_in, n_out);
            off += n_in * n_out + n_out;
            if l + 1 < n_layers {
                y.iter_mut().for_each(|z| *z = self.activation.apply(*z));
            }
            acts.push(y);
        }
        Ok(MlpTape { acts })
    }

    /// Reverse pass. Adds `scale * dOut/dθ · output_grad` into `param_grad`
    /// (when given) and returns the input gradient (unscaled).
    pub fn backward_tape(
        &self,
        params: &[f64],
        tape: &MlpTape,
        output_grad: &[f64],
        param_grad: Option<&mut [f64]>,
        scale: f64,
    ) -> Result<Vec<f64>> {
        check_dim("mlp output gradient", self.output_dim(), output_grad.len())?;
        check_dim("mlp parameters", self.n_params(), params.len())?;
        let sizes = self.sizes();
        let n_layers = sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += sizes[l] * sizes[l + 1] + sizes[l + 1];
        }
        let mut pg = param_grad;
        if let Some(g) = pg.as_deref() {
            check_dim("mlp parameter gradient", self.n_params(), g.len())?;
        }
        let mut delta = output_grad.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let x = &tape.acts[l];
            let o = offsets[l];
            if let Some(g) = pg.as_deref_mut() {
                for j in 0..n_out {
                    let dj = scale * delta[j];
                    if dj != 0.0 {
                        let row = &mut g[o + j * n_in..o + (j + 1) * n_in];
                        for (gi, xi) in row.iter_mut().zip(x) {
                            *gi += dj * xi;
                        }
                    }
                    g[o + n_in * n_out + j] += dj;
                }
            }
            let mut dx = vec![0.0; n_in];
            for j in 0..n_out {
                let dj = delta[j];
                if dj != 0.0 {
                    let row = &params[o + j * n_in..o + (j + 1) * n_in];
                    for (d, w) in dx.iter_mut().zip(row) {
                        *d += w * dj;
                    }
                }
            }
            if l > 0 {
                for (d, a) in dx.iter_mut().zip(x) {
                    *d *= self.activation.derivative_from_output(*a);
                }
            }
            delta = dx;
        }
        Ok(delta)
    }
}

fn affine(block: &[f64], x: &[f64], n_in: usize, n_out: usize) -> Vec<f64> {
    let (w, b) = block.split_at(n_in * n_out);
    (0..n_out)
        .map(|j| b[j] + w[j * n_in..(j + 1) * n_in].iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
        .collect()
}

pub fn mlp_forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    spec.forward(params.as_slice(), input)
}

pub fn mlp_backward(spec: &MlpSpec, params: &ParamVector, input: &[f64], output_grad: &[f64]) -> Result<MlpGradients> {
    let tape = spec.forward_tape(params.as_slice(), input)?;
    let mut g = vec![0.0; spec.n_params()];
    let input_grad = spec.backward_tape(params.as_slice(), &tape, output_grad, Some(&mut g), 1.0)?;
    Ok(MlpGradients {
        params: g,
        input: input_grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spec(rng: &mut ChaCha8Rng) -> MlpSpec {
        let input = rng.random_range(1..5);
        let hidden = (0..rng.random_range(1..4)).map(|_| rng.random_range(1..7)).collect();
        let act = [Activation::Relu, Activation::Tanh, Activation::Identity][rng.random_range(0..3)];
        let head = match rng.random_range(0..3) {
            0 => OutputHead::Scalar,
            1 => OutputHead::Mean { dim: rng.random_range(1..4) },
            _ => OutputHead::MeanLogVar { dim: rng.random_range(1..3) },
        };
        MlpSpec::new(input, hidden, act, head).unwrap()
    }

    /// Independent forward pass through nalgebra matrices.
    fn reference_forward(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Vec<f64> {
        let sizes = spec.sizes();
        let mut x = DVector::from_column_slice(input);
        let mut off = 0;
        for l in 0..sizes.len() - 1 {
            let (i, o) = (sizes[l], sizes[l + 1]);
            let w = DMatrix::from_row_slice(o, i, &params[off..off + i * o]);
            let b = DVector::from_column_slice(&params[off + i * o..off + i * o + o]);
            off += i * o + o;
            x = w * x + b;
            if l + 2 < sizes.len() {
                x = x.map(|z| match spec.activation {
                    Activation::Relu => {
                        if z > 0.0 {
                            z
                        } else {
                            0.0
                        }
                    }
                    Activation::Tanh => z.tanh(),
                    Activation::Identity => z,
                });
            }
        }
        x.as_slice().to_vec()
    }

    #[test]
    fn zero_params_give_zero_output() {
        let spec = MlpSpec::new(3, vec![4, 2], Activation::Tanh, OutputHead::Mean { dim: 2 }).unwrap();
        let p = ParamVector::zeros(spec.layout());
        assert_eq!(mlp_forward(&spec, &p, &[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_net_passes_input() {
        let spec = MlpSpec::new(1, vec![1], Activation::Identity, OutputHead::Scalar).unwrap();
        let p = ParamVector::new(spec.layout(), vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(mlp_forward(&spec, &p, &[3.0]).unwrap(), vec![3.0]);
        let g = mlp_backward(&spec, &p, &[3.0], &[1.0]).unwrap();
        // dy/dw for the first weight is the input
        assert_eq!(g.params[0], 3.0);
        assert_eq!(g.input, vec![1.0]);
    }

    #[test]
    fn dead_relu_unit_blocks_gradient() {
        let spec = MlpSpec::new(1, vec![2], Activation::Relu, OutputHead::Scalar).unwrap();
        // unit 0 pre-activation = -x - 1 < 0 for x = 1, unit 1 = x
        let p = ParamVector::new(spec.layout(), vec![-1.0, 1.0, -1.0, 0.0, 2.0, 3.0, 0.0]).unwrap();
        let g = mlp_backward(&spec, &p, &[1.0], &[1.0]).unwrap();
        assert_eq!(g.params[0], 0.0);
        assert_eq!(g.params[2], 0.0);
        assert_eq!(g.params[1], 3.0);
        assert_eq!(g.input, vec![3.0]);
    }

    #[test]
    fn rejects_wrong_dimensions() {
        let spec = MlpSpec::new(2, vec![3], Activation::Relu, OutputHead::Scalar).unwrap();
        let p = ParamVector::zeros(spec.layout());
        assert!(mlp_forward(&spec, &p, &[1.0]).is_err());
        assert!(mlp_backward(&spec, &p, &[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(MlpSpec::new(2, vec![], Activation::Relu, OutputHead::Scalar).is_err());
    }

    #[test]
    fn forward_matches_reference_implementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let spec = random_spec(&mut rng);
            let p = spec.init(&mut rng, 1.0);
            let x: Vec<f64> = (0..spec.input_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y = mlp_forward(&spec, &p, &x).unwrap();
            let r = reference_forward(&spec, p.as_slice(), &x);
            for (a, b) in y.iter().zip(&r) {
                assert!((a - b).abs() <= 1e-12);
            }
            let tape = spec.forward_tape(p.as_slice(), &x).unwrap();
            assert_eq!(tape.output(), y.as_slice());
        }
    }

    #[test]
    fn output_scale_zero_gives_zero_last_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = MlpSpec::new(2, vec![5], Activation::Relu, OutputHead::Scalar).unwrap();
        let p = spec.init(&mut rng, 0.0);
        assert_eq!(spec.forward(p.as_slice(), &[0.3, -0.2]).unwrap(), vec![0.0]);
    }
}
