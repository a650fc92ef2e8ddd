use super::params::{axpy, dot, ParamVector};
use super::policy::StochasticPolicy;
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolve {
    pub solution: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// False when the iteration cap was reached before the tolerance.
    pub converged: bool,
}

/// Conjugate gradient for a symmetric positive definite operator.
/// Stops when `‖A x − b‖ ≤ tol`.
pub fn conjugate_gradient<F>(mut apply: F, b: &[f64], tol: f64, max_iters: usize) -> CgSolve
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut best = (rr.sqrt(), x.clone());
    let mut it = 0;
    while rr.sqrt() > tol && it < max_iters {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        let rr_new = dot(&r, &r);
        it += 1;
        if rr_new.sqrt() < best.0 {
            best = (rr_new.sqrt(), x.clone());
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    let converged = best.0 <= tol;
    CgSolve {
        solution: best.1,
        residual_norm: best.0,
        iterations: it,
        converged,
    }
}

/// `F = (1/n) Σ s sᵀ + damping·I` from explicit score vectors.
#[derive(Debug, Clone)]
pub struct EmpiricalFisher {
    scores: Vec<Vec<f64>>,
    damping: f64,
}

impl EmpiricalFisher {
    pub fn new(scores: Vec<Vec<f64>>, damping: f64) -> Result<Self> {
        if !(damping > 0.0) {
            return Err(Error::InvalidArgument(format!("damping {damping} must be positive")));
        }
        if let Some(first) = scores.first() {
            let n = first.len();
            for s in &scores {
                check_dim("score vector", n, s.len())?;
            }
        }
        Ok(Self { scores, damping })
    }

    pub fn from_policy(
        policy: &dyn StochasticPolicy,
        params: &[f64],
        states: &[Vec<f64>],
        actions: &[Vec<f64>],
        damping: f64,
    ) -> Result<Self> {
        check_dim("fisher actions", states.len(), actions.len())?;
        let scores = states
            .iter()
            .zip(actions)
            .map(|(x, a)| {
                let mut s = vec![0.0; policy.n_params()];
                policy.log_prob_grad(params, x, a, 1.0, &mut s)?;
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(scores, damping)
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn scores(&self) -> &[Vec<f64>] {
        &self.scores
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().map(|x| self.damping * x).collect();
        if !self.scores.is_empty() {
            let w = 1.0 / self.scores.len() as f64;
            for s in &self.scores {
                axpy(&mut out, w * dot(s, v), s);
            }
        }
        out
    }

    /// Solves `F v = grad` by CG to an absolute residual of `1e-10·max(‖grad‖, 1)`.
    pub fn solve(&self, grad: &[f64]) -> CgSolve {
        let scale = dot(grad, grad).sqrt().max(1.0);
        let sol = conjugate_gradient(|v| self.apply(v), grad, 1e-10 * scale, 10 * grad.len().max(10));
        if !sol.converged {
            log::warn!(
                "fisher solve stopped after {} iterations with residual {:.3e}",
                sol.iterations,
                sol.residual_norm
            );
        }
        sol
    }
}

/// `(F + damping·I)⁻¹ grad` with `F` the average score outer product over `(states, actions)`.
pub fn fisher_system_solve(
    policy: &dyn StochasticPolicy,
    params: &ParamVector,
    states: &[Vec<f64>],
    actions: &[Vec<f64>],
    grad: &ParamVector,
    damping: f64,
) -> Result<(ParamVector, CgSolve)> {
    check_dim("fisher gradient", params.len(), grad.len())?;
    let f = EmpiricalFisher::from_policy(policy, params.as_slice(), states, actions, damping)?;
    let sol = f.solve(grad.as_slice());
    let v = grad.with_values(sol.solution.clone())?;
    Ok((v, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gradient_gives_zero() {
        let f = EmpiricalFisher::new(vec![vec![1.0, 2.0]], 0.1).unwrap();
        assert_eq!(f.solve(&[0.0, 0.0]).solution, vec![0.0, 0.0]);
    }

    #[test]
    fn rank_one_closed_form() {
        let s = vec![0.5, -1.0, 2.0];
        let d = 0.3;
        let f = EmpiricalFisher::new(vec![s.clone()], d).unwrap();
        let v = f.solve(&s).solution;
        let k = 1.0 / (dot(&s, &s) + d);
        for (vi, si) in v.iter().zip(&s) {
            assert!((vi - k * si).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_damping() {
        assert!(EmpiricalFisher::new(vec![], 0.0).is_err());
    }

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 30;
        let scores: Vec<Vec<f64>> = (0..12).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = EmpiricalFisher::new(scores.clone(), 1e-2).unwrap();
        let v = f.solve(&g);
        assert!(v.converged);
        let mut m = DMatrix::<f64>::identity(n, n) * 1e-2;
        for s in &scores {
            let s = DVector::from_column_slice(s);
            m += &s * s.transpose() / scores.len() as f64;
        }
        let dense = m.clone().lu().solve(&DVector::from_column_slice(&g)).unwrap();
        for i in 0..n {
            assert!((dense[i] - v.solution[i]).abs() < 1e-6);
        }
        let r = m * DVector::from_column_slice(&v.solution) - DVector::from_column_slice(&g);
        assert!(r.norm() <= 1e-6 * dot(&g, &g).sqrt());
    }
}
