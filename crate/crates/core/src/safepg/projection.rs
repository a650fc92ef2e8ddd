//! Closed-form projections onto a single linearized Lyapunov constraint.

use crate::diff::dot;
use crate::error::{check_dim, check_finite, Result};

/// Gradients shorter than this are treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-12;
/// Violations below this fraction of the problem scale count as satisfied.
const ACTIVE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    /// Projected action, or projected mean for the Gaussian variant.
    pub action: Vec<f64>,
    /// Projected standard deviation (Gaussian variant only).
    pub std: Option<Vec<f64>>,
    /// `λ*(x) ≥ 0`; zero iff inactive.
    pub lambda: f64,
    pub active: bool,
    /// The constraint gradient vanished and the input was returned unchanged.
    pub degenerate: bool,
    /// Some standard deviation was raised to the floor.
    pub std_floor_hit: bool,
}

/// Euclidean projection of `action_unc` onto `{a : gᵀ(a − baseline) ≤ ε̃}`:
/// `a = action_unc − λ* g` with `λ* = ((gᵀ(action_unc − baseline) − ε̃) / gᵀg)₊`.
pub fn safety_layer_project(
    action_unc: &[f64],
    baseline_action: &[f64],
    g_l: &[f64],
    epsilon_tilde: f64,
) -> Result<ProjectionResult> {
    let n = action_unc.len();
    check_dim("baseline action", n, baseline_action.len())?;
    check_dim("constraint gradient", n, g_l.len())?;
    check_finite("unconstrained action", action_unc)?;
    check_finite("baseline action", baseline_action)?;
    check_finite("constraint gradient", g_l)?;
    check_finite("epsilon", &[epsilon_tilde])?;

    let unchanged = |degenerate| ProjectionResult {
        action: action_unc.to_vec(),
        std: None,
        lambda: 0.0,
        active: false,
        degenerate,
        std_floor_hit: false,
    };
    let gg = dot(g_l, g_l);
    if gg.sqrt() < DEGENERATE_NORM {
        return Ok(unchanged(true));
    }
    let mut usage = 0.0;
    let mut scale = epsilon_tilde.abs();
    for i in 0..n {
        let diff = action_unc[i] - baseline_action[i];
        usage += g_l[i] * diff;
        scale += (g_l[i] * action_unc[i]).abs() + (g_l[i] * baseline_action[i]).abs();
    }
    let violation = usage - epsilon_tilde;
    if violation <= ACTIVE_REL_TOL * scale.max(1.0) {
        return Ok(unchanged(false));
    }
    let lambda = violation / gg;
    let action = action_unc.iter().zip(g_l).map(|(a, g)| a - lambda * g).collect();
    Ok(ProjectionResult {
        action,
        std: None,
        lambda,
        active: true,
        degenerate: false,
        std_floor_hit: false,
    })
}

/// Projects the mean as in [`safety_layer_project`], then shrinks the standard
/// deviation along the constrained directions so that every point of the box
/// `mean ± k·std` stays feasible. Components with `g_i = 0` keep their spread;
/// no component drops below `std_floor`.
pub fn safety_layer_project_gaussian(
    mean_unc: &[f64],
    std_unc: &[f64],
    baseline_action: &[f64],
    g_l: &[f64],
    epsilon_tilde: f64,
    k: f64,
    std_floor: f64,
) -> Result<ProjectionResult> {
    check_dim("projected std", mean_unc.len(), std_unc.len())?;
    check_finite("std", std_unc)?;
    if std_unc.iter().any(|s| *s <= 0.0) {
        return Err(crate::error::Error::InvalidArgument("standard deviations must be positive".into()));
    }
    let mut res = safety_layer_project(mean_unc, baseline_action, g_l, epsilon_tilde)?;
    let mut std = std_unc.to_vec();
    if !res.degenerate {
        let usage: f64 = res.action.iter().zip(baseline_action).zip(g_l).map(|((a, b), g)| g * (a - b)).sum();
        let slack = (epsilon_tilde - usage).max(0.0);
        let spread: f64 = k * g_l.iter().zip(&std).map(|(g, s)| g.abs() * s).sum::<f64>();
        if spread > slack {
            let r = slack / spread;
            for (s, g) in std.iter_mut().zip(g_l) {
                if *g != 0.0 {
                    *s *= r;
                }
            }
        }
    }
    for s in std.iter_mut() {
        if *s < std_floor {
            *s = std_floor;
            res.std_floor_hit = true;
        }
    }
    res.std = Some(std);
    Ok(res)
}

/// `Jᵀ v` for the projection Jacobian `J = I − [active]·g gᵀ/‖g‖²` (symmetric).
pub fn projection_vjp(res: &ProjectionResult, g_l: &[f64], v: &[f64]) -> Vec<f64> {
    if !res.active {
        return v.to_vec();
    }
    let k = dot(g_l, v) / dot(g_l, g_l);
    v.iter().zip(g_l).map(|(vi, gi)| vi - k * gi).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaMultiplier {
    pub lambda: f64,
    pub degenerate: bool,
}

/// Closed-form multiplier of `min g_cᵀΔ + (β/2) ΔᵀHΔ  s.t.  g_dᵀΔ ≤ ε̃`:
/// `λ* = ((−β ε̃ − g_cᵀH⁻¹g_d) / (g_dᵀH⁻¹g_d))₊`.
/// `h_inv` applies `H⁻¹`. Returns zero with the degenerate flag when `‖g_d‖ < 1e-12`.
pub fn theta_projection_multiplier<F>(
    grad_c: &[f64],
    grad_d: &[f64],
    h_inv: F,
    epsilon_tilde: f64,
    beta: f64,
) -> Result<ThetaMultiplier>
where
    F: FnOnce(&[f64]) -> Vec<f64>,
{
    check_dim("constraint gradient", grad_c.len(), grad_d.len())?;
    if dot(grad_d, grad_d).sqrt() < DEGENERATE_NORM {
        return Ok(ThetaMultiplier {
            lambda: 0.0,
            degenerate: true,
        });
    }
    let hd = h_inv(grad_d);
    let den = dot(grad_d, &hd);
    let num = -beta * epsilon_tilde - dot(grad_c, &hd);
    let lambda = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
    Ok(ThetaMultiplier {
        lambda,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfspace_example() {
        let r = safety_layer_project(&[2.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(r.lambda, 1.0);
        assert_eq!(r.action, vec![1.0, 0.0]);
        assert!(r.active);
    }

    #[test]
    fn feasible_action_unchanged() {
        let r = safety_layer_project(&[0.5, 3.0], &[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(r.lambda, 0.0);
        assert!(!r.active);
        assert_eq!(r.action, vec![0.5, 3.0]);
        let r = safety_layer_project(&[0.2, -0.1], &[0.2, -0.1], &[0.3, 0.7], 0.0).unwrap();
        assert_eq!(r.action, vec![0.2, -0.1]);
    }

    #[test]
    fn degenerate_gradient() {
        let r = safety_layer_project(&[5.0], &[0.0], &[0.0], -1.0).unwrap();
        assert!(r.degenerate && !r.active);
        assert_eq!(r.action, vec![5.0]);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(safety_layer_project(&[f64::NAN], &[0.0], &[1.0], 0.0).is_err());
        assert!(safety_layer_project(&[0.0], &[0.0], &[1.0], f64::INFINITY).is_err());
    }

    #[test]
    fn projection_is_idempotent() {
        let r = safety_layer_project(&[1.7, -0.4, 2.2], &[0.1, 0.2, 0.3], &[0.5, -1.5, 0.25], 0.05).unwrap();
        assert!(r.active);
        let again = safety_layer_project(&r.action, &[0.1, 0.2, 0.3], &[0.5, -1.5, 0.25], 0.05).unwrap();
        assert!(!again.active);
        assert_eq!(again.action, r.action);
    }

    #[test]
    fn gaussian_large_margin_unchanged() {
        let r = safety_layer_project_gaussian(&[0.0, 0.0], &[0.1, 0.2], &[0.0, 0.0], &[1.0, 1.0], 10.0, 2.0, 1e-3).unwrap();
        assert_eq!(r.action, vec![0.0, 0.0]);
        assert_eq!(r.std, Some(vec![0.1, 0.2]));
        assert!(!r.std_floor_hit);
    }

    #[test]
    fn gaussian_shrinks_only_constrained_axis() {
        let r = safety_layer_project_gaussian(&[2.0, 1.0], &[0.5, 0.5], &[0.0, 0.0], &[1.0, 0.0], 1.0, 2.0, 1e-6).unwrap();
        assert_eq!(r.action, vec![1.0, 1.0]);
        let std = r.std.unwrap();
        assert!(std[0] < 0.5);
        assert_eq!(std[1], 0.5);
    }

    #[test]
    fn gaussian_partial_shrink() {
        // mean feasible with slack 0.5; spread 2·1·0.5 = 1 -> scale by 0.5
        let r = safety_layer_project_gaussian(&[0.5, 0.0], &[0.5, 0.3], &[0.0, 0.0], &[1.0, 0.0], 1.0, 2.0, 1e-6).unwrap();
        assert_eq!(r.std, Some(vec![0.25, 0.3]));
        assert!(!r.active);
    }

    #[test]
    fn gaussian_floor_binding() {
        let r = safety_layer_project_gaussian(&[3.0], &[1.0], &[0.0], &[1.0], 0.0, 2.0, 0.05).unwrap();
        assert_eq!(r.std, Some(vec![0.05]));
        assert!(r.std_floor_hit);
    }

    #[test]
    fn vjp_zeroes_constrained_component() {
        let r = safety_layer_project(&[2.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(projection_vjp(&r, &[1.0, 0.0], &[3.0, -2.0]), vec![0.0, -2.0]);
        let r = safety_layer_project(&[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(projection_vjp(&r, &[1.0, 0.0], &[3.0, -2.0]), vec![3.0, -2.0]);
    }

    #[test]
    fn multiplier_degenerate_and_orthogonal() {
        let id = |v: &[f64]| v.to_vec();
        let m = theta_projection_multiplier(&[1.0, 0.0], &[0.0, 0.0], id, 0.3, 1.0).unwrap();
        assert_eq!(m, ThetaMultiplier { lambda: 0.0, degenerate: true });
        let m = theta_projection_multiplier(&[1.0, 0.0], &[0.0, 1.0], id, 0.0, 1.0).unwrap();
        assert_eq!(m.lambda, 0.0);
        assert!(!m.degenerate);
    }

    #[test]
    fn multiplier_makes_constraint_tight() {
        let id = |v: &[f64]| v.to_vec();
        let (gc, gd, eps, beta) = ([-1.0, 0.5], [1.0, 0.2], 0.1, 2.0);
        let m = theta_projection_multiplier(&gc, &gd, id, eps, beta).unwrap();
        assert!(m.lambda > 0.0);
        let delta: Vec<f64> = (0..2).map(|i| -(gc[i] + m.lambda * gd[i]) / beta).collect();
        assert!((dot(&gd, &delta) - eps).abs() < 1e-12);
    }
}
