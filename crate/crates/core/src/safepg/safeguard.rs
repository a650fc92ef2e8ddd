//! Feasibility recovery and threshold tightening.

use crate::diff::axpy;
use crate::error::{check_dim, Error, Result};

/// True when the measured constraint return exceeds `d0·(1 + margin)`.
pub fn safeguard_triggered(d_hat: f64, d0: f64, margin: f64) -> bool {
    d_hat > d0 * (1.0 + margin)
}

/// `d0·(1 − δ)` for `0 ≤ δ < 1`.
pub fn tighten_threshold(d0: f64, delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("tightening factor {delta} outside [0, 1)")));
    }
    Ok(d0 * (1.0 - delta))
}

/// Pure descent on the constraint estimate: `θ ← θ − α_sg ∇D̂`.
pub fn safeguard_update(params: &mut [f64], grad_d: &[f64], alpha_sg: f64) -> Result<()> {
    check_dim("safeguard gradient", params.len(), grad_d.len())?;
    if alpha_sg != 0.0 {
        axpy(params, -alpha_sg, grad_d);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::{policy_evaluate, softmax_policy_gradient, Signal, TabularPolicy};
    use crate::diff::SoftmaxPolicy;
    use crate::envs::six_state_fixture;

    #[test]
    fn trigger_predicate() {
        assert!(!safeguard_triggered(1.0, 1.0, 0.05));
        assert!(!safeguard_triggered(1.04, 1.0, 0.05));
        assert!(safeguard_triggered(1.06, 1.0, 0.05));
    }

    #[test]
    fn tightening() {
        assert_eq!(tighten_threshold(5.0, 0.0).unwrap(), 5.0);
        assert!((tighten_threshold(100.0, 0.1).unwrap() - 90.0).abs() < 1e-12);
        assert!(tighten_threshold(1.0, 1.0).is_err());
        assert!(tighten_threshold(1.0, -0.1).is_err());
        let gamma = 0.9;
        let d_hat = 3.0;
        for delta in [0.0, 0.2, 0.5, 0.9] {
            let tight = (1.0 - gamma) * (tighten_threshold(4.0, delta).unwrap() - d_hat);
            assert!(tight <= (1.0 - gamma) * (4.0 - d_hat));
        }
    }

    #[test]
    fn zero_rate_is_noop() {
        let mut p = vec![1.0, 2.0];
        safeguard_update(&mut p, &[3.0, 4.0], 0.0).unwrap();
        assert_eq!(p, vec![1.0, 2.0]);
    }

    #[test]
    fn exact_constraint_value_decreases() {
        let cmdp = six_state_fixture();
        let pol = SoftmaxPolicy::new(cmdp.n_states(), cmdp.n_actions());
        // logits favouring the action that drifts into the constrained states
        let mut theta = vec![0.0; cmdp.n_states() * cmdp.n_actions()];
        for x in 0..cmdp.n_states() {
            theta[x * 2 + 1] = 2.0;
        }
        let d_of = |theta: &[f64]| {
            let tab: TabularPolicy = pol.to_tabular(theta).unwrap();
            policy_evaluate(&cmdp, &tab, Signal::Constraint).unwrap()[cmdp.x0()]
        };
        let mut prev = d_of(&theta);
        for _ in 0..10 {
            let tab = pol.to_tabular(&theta).unwrap();
            // ∇D = ∇(C + D) − ∇C
            let with_d = softmax_policy_gradient(&cmdp, &tab, 1.0).unwrap();
            let only_c = softmax_policy_gradient(&cmdp, &tab, 0.0).unwrap();
            let g: Vec<f64> = with_d.iter().zip(&only_c).map(|(a, b)| a - b).collect();
            safeguard_update(&mut theta, &g, 0.5).unwrap();
            let d = d_of(&theta);
            assert!(d < prev, "{d} !< {prev}");
            prev = d;
        }
    }
}
