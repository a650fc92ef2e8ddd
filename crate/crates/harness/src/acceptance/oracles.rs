//! Numeric reference computations that share no code with the library paths they check.

use lyapunov_core::cmdp::{TabularCmdp, TabularPolicy};
use nalgebra::{DMatrix, DVector};

/// Nearest point of `{p : gᵀ(p − b) ≤ ε}` to `a`, by bisection on the
/// complementarity residual `gᵀ(a − μg − b) − ε`, which is decreasing in `μ`.
pub fn halfspace_projection(a: &[f64], b: &[f64], g: &[f64], eps: f64) -> Vec<f64> {
    let residual = |mu: f64| -> f64 {
        g.iter().zip(a).zip(b).map(|((g, a), b)| g * (a - mu * g - b)).sum::<f64>() - eps
    };
    let mu = if residual(0.0) <= 0.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        while residual(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    a.iter().zip(g).map(|(a, g)| a - mu * g).collect()
}

/// Multiplier of `min g_cᵀΔ + (β/2)ΔᵀHΔ s.t. g_dᵀΔ ≤ ε`, by bisection on the
/// stationarity residual `−g_dᵀH⁻¹(g_c + λg_d)/β − ε`, which is decreasing in `λ`.
pub fn theta_multiplier_kkt(gc: &DVector<f64>, gd: &DVector<f64>, h: &DMatrix<f64>, eps: f64, beta: f64) -> f64 {
    let hinv = h.clone().try_inverse().expect("oracle needs an invertible H");
    let residual = |l: f64| -(gd.transpose() * &hinv * (gc + gd * l))[0] / beta - eps;
    if residual(0.0) <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while residual(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `E[Σ γ^t h(x_t) | x0]` under `pi` by fixed-point iteration.
pub fn discounted_state_sum(cmdp: &TabularCmdp, pi: &TabularPolicy, h: &[f64]) -> f64 {
    let n = cmdp.n_states();
    let mut v = vec![0.0; n];
    let iters = (40.0 / (1.0 - cmdp.gamma())).ceil() as usize;
    for _ in 0..iters {
        v = (0..n)
            .map(|x| {
                let mut next = 0.0;
                for a in 0..cmdp.n_actions() {
                    let ev: f64 = cmdp.next_row(x, a).iter().zip(&v).map(|(p, v)| p * v).sum();
                    next += pi.prob(x, a) * ev;
                }
                h[x] + cmdp.gamma() * next
            })
            .collect();
    }
    v[cmdp.x0()]
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfspace_example() {
        let p = halfspace_projection(&[2.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], 1.0);
        assert!((p[0] - 1.0).abs() < 1e-9 && p[1].abs() < 1e-12);
        let p = halfspace_projection(&[0.0, 3.0], &[0.0, 0.0], &[1.0, 0.0], 1.0);
        assert!(p[0].abs() < 1e-9);
    }

    #[test]
    fn kkt_inactive_is_zero() {
        let h = DMatrix::identity(2, 2);
        let l = theta_multiplier_kkt(&DVector::from_vec(vec![1.0, 0.0]), &DVector::from_vec(vec![0.0, 1.0]), &h, 0.0, 1.0);
        assert!(l.abs() < 1e-9);
    }
}
