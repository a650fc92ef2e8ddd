use nalgebra::{DMatrix, DVector};

use super::model::{TabularCmdp, TabularPolicy};
use crate::error::{check_dim, Error, Result};

/// Which immediate cost a value function accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Cost,
    Constraint,
}

impl Signal {
    /// The immediate cost as an `[x][a]` matrix.
    pub fn matrix(self, cmdp: &TabularCmdp) -> Vec<f64> {
        match self {
            Signal::Cost => cmdp.cost_matrix().to_vec(),
            Signal::Constraint => cmdp.constraint_matrix(),
        }
    }
}

/// `T_{π,h}[V](x) = Σ_a π(a|x) [h(x,a) + γ Σ_x' P(x'|x,a) V(x')]`.
pub fn bellman_apply(
    cmdp: &TabularCmdp,
    policy: &TabularPolicy,
    h: &[f64],
    values: &[f64],
) -> Result<Vec<f64>> {
    policy.check_against(cmdp)?;
    check_dim("bellman cost matrix", cmdp.n_states() * cmdp.n_actions(), h.len())?;
    check_dim("bellman value vector", cmdp.n_states(), values.len())?;
    let q = q_values(cmdp, h, values);
    let na = cmdp.n_actions();
    Ok((0..cmdp.n_states())
        .map(|x| policy.row(x).iter().zip(&q[x * na..(x + 1) * na]).map(|(p, q)| p * q).sum())
        .collect())
}

/// `Q(x,a) = h(x,a) + γ Σ_x' P(x'|x,a) V(x')`, row-major. Inputs are trusted.
pub fn q_values(cmdp: &TabularCmdp, h: &[f64], values: &[f64]) -> Vec<f64> {
    let (ns, na, gamma) = (cmdp.n_states(), cmdp.n_actions(), cmdp.gamma());
    let mut q = Vec::with_capacity(ns * na);
    for x in 0..ns {
        for a in 0..na {
            let next: f64 = cmdp.next_row(x, a).iter().zip(values).map(|(p, v)| p * v).sum();
            q.push(h[x * na + a] + gamma * next);
        }
    }
    q
}

/// Policy-averaged transition matrix `P_π[x][x']`.
pub fn policy_transition(cmdp: &TabularCmdp, policy: &TabularPolicy) -> DMatrix<f64> {
    let ns = cmdp.n_states();
    let mut p = DMatrix::zeros(ns, ns);
    for x in 0..ns {
        for (a, &pa) in policy.row(x).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (y, &pxy) in cmdp.next_row(x, a).iter().enumerate() {
                p[(x, y)] += pa * pxy;
            }
        }
    }
    p
}

fn policy_cost(cmdp: &TabularCmdp, policy: &TabularPolicy, h: &[f64]) -> DVector<f64> {
    let na = cmdp.n_actions();
    DVector::from_iterator(
        cmdp.n_states(),
        (0..cmdp.n_states()).map(|x| policy.row(x).iter().zip(&h[x * na..]).map(|(p, c)| p * c).sum()),
    )
}

fn resolvent(cmdp: &TabularCmdp, policy: &TabularPolicy) -> DMatrix<f64> {
    let ns = cmdp.n_states();
    DMatrix::identity(ns, ns) - policy_transition(cmdp, policy) * cmdp.gamma()
}

/// Exact fixed point of `T_{π,h}` by a dense linear solve of `(I − γP_π) V = h_π`.
pub fn evaluate_cost(cmdp: &TabularCmdp, policy: &TabularPolicy, h: &[f64]) -> Result<Vec<f64>> {
    policy.check_against(cmdp)?;
    check_dim("evaluation cost matrix", cmdp.n_states() * cmdp.n_actions(), h.len())?;
    let rhs = policy_cost(cmdp, policy, h);
    let v = resolvent(cmdp, policy)
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("policy evaluation"))?;
    Ok(v.iter().copied().collect())
}

/// `C_π(·)` or `D_π(·)` for every starting state.
pub fn policy_evaluate(cmdp: &TabularCmdp, policy: &TabularPolicy, which: Signal) -> Result<Vec<f64>> {
    evaluate_cost(cmdp, policy, &which.matrix(cmdp))
}

/// Expected discounted number of visits `E[Σ_t γ^t 1{x_t = x} | x0, π]`.
pub fn state_occupancy(cmdp: &TabularCmdp, policy: &TabularPolicy) -> Result<Vec<f64>> {
    policy.check_against(cmdp)?;
    let ns = cmdp.n_states();
    let mut e0 = DVector::zeros(ns);
    e0[cmdp.x0()] = 1.0;
    let occ = resolvent(cmdp, policy)
        .transpose()
        .lu()
        .solve(&e0)
        .ok_or(Error::Singular("state occupancy"))?;
    Ok(occ.iter().copied().collect())
}

/// Normalized γ-visiting distribution `μ(x) = (1−γ) Σ_t γ^t Pr(x_t = x)`.
pub fn discounted_visitation(cmdp: &TabularCmdp, policy: &TabularPolicy) -> Result<Vec<f64>> {
    let scale = 1.0 - cmdp.gamma();
    Ok(state_occupancy(cmdp, policy)?.into_iter().map(|o| o * scale).collect())
}

/// Exact gradient of `C_θ(x0) + λ D_θ(x0)` for a tabular softmax policy with
/// logits `θ[x][a]`: `∂/∂θ[x,a] = occ(x) π(a|x) (Q(x,a) − V(x))`.
pub fn softmax_policy_gradient(
    cmdp: &TabularCmdp,
    policy: &TabularPolicy,
    lambda: f64,
) -> Result<Vec<f64>> {
    let na = cmdp.n_actions();
    let h: Vec<f64> = cmdp
        .cost_matrix()
        .iter()
        .zip(cmdp.constraint_matrix())
        .map(|(c, d)| c + lambda * d)
        .collect();
    let v = evaluate_cost(cmdp, policy, &h)?;
    let q = q_values(cmdp, &h, &v);
    let occ = state_occupancy(cmdp, policy)?;
    let mut grad = vec![0.0; cmdp.n_states() * na];
    for x in 0..cmdp.n_states() {
        for a in 0..na {
            grad[x * na + a] = occ[x] * policy.prob(x, a) * (q[x * na + a] - v[x]);
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn self_loop(cost: f64, d: f64, gamma: f64) -> TabularCmdp {
        TabularCmdp::new(1, 1, vec![1.0], vec![cost], vec![d], gamma, 0, f64::INFINITY).unwrap()
    }

    fn chain(gamma: f64) -> TabularCmdp {
        // x0 -> x1 -> x1 regardless of action
        TabularCmdp::new(2, 1, vec![0.0, 1.0, 0.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0], gamma, 0, 1.0)
            .unwrap()
    }

    #[test]
    fn bellman_single_state() {
        let m = self_loop(1.0, 0.0, 0.5);
        let pi = TabularPolicy::uniform(1, 1);
        assert_eq!(bellman_apply(&m, &pi, &[1.0], &[0.0]).unwrap(), vec![1.0]);
        assert_eq!(bellman_apply(&m, &pi, &[1.0], &[2.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn bellman_matches_matrix_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = TabularCmdp::random(3, 2, 0.8, &mut rng);
        let pi = TabularPolicy::random(3, 2, &mut rng);
        let v = [0.3, -1.2, 2.5];
        let got = bellman_apply(&m, &pi, m.cost_matrix(), &v).unwrap();
        // dense oracle: h_π + γ P_π V
        let p = policy_transition(&m, &pi);
        let h = policy_cost(&m, &pi, m.cost_matrix());
        let expected = h + p * DVector::from_row_slice(&v) * m.gamma();
        for x in 0..3 {
            assert_abs_diff_eq!(got[x], expected[x], epsilon = 1e-12);
        }
    }

    #[test]
    fn bellman_rejects_mismatch() {
        let m = self_loop(1.0, 0.0, 0.5);
        let pi = TabularPolicy::uniform(1, 1);
        assert!(matches!(
            bellman_apply(&m, &pi, &[1.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let pi2 = TabularPolicy::uniform(2, 1);
        assert!(bellman_apply(&m, &pi2, &[1.0], &[0.0]).is_err());
    }

    #[test]
    fn evaluate_geometric_series() {
        let m = self_loop(0.0, 1.0, 0.9);
        let d = policy_evaluate(&m, &TabularPolicy::uniform(1, 1), Signal::Constraint).unwrap();
        assert_abs_diff_eq!(d[0], 10.0, epsilon = 1e-12);
        let c = policy_evaluate(&m, &TabularPolicy::uniform(1, 1), Signal::Cost).unwrap();
        assert_eq!(c, vec![0.0]);
    }

    #[test]
    fn evaluate_matches_value_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = TabularCmdp::random(4, 2, 0.9, &mut rng);
        let pi = TabularPolicy::random(4, 2, &mut rng);
        let exact = policy_evaluate(&m, &pi, Signal::Cost).unwrap();
        let mut v = vec![0.0; 4];
        for _ in 0..2000 {
            let next = bellman_apply(&m, &pi, m.cost_matrix(), &v).unwrap();
            let residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if residual < 1e-14 {
                break;
            }
        }
        for x in 0..4 {
            assert_abs_diff_eq!(exact[x], v[x], epsilon = 1e-11);
        }
    }

    #[test]
    fn visitation_trivial_cases() {
        let m = self_loop(0.0, 0.0, 0.7);
        let mu = discounted_visitation(&m, &TabularPolicy::uniform(1, 1)).unwrap();
        assert_abs_diff_eq!(mu[0], 1.0, epsilon = 1e-14);

        let m = chain(0.5);
        let mu = discounted_visitation(&m, &TabularPolicy::uniform(2, 1)).unwrap();
        assert_abs_diff_eq!(mu[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(mu[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn visitation_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = TabularCmdp::random(6, 3, 0.95, &mut rng);
        let mu = discounted_visitation(&m, &TabularPolicy::random(6, 3, &mut rng)).unwrap();
        assert_abs_diff_eq!(mu.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        assert!(mu.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = TabularCmdp::random(3, 3, 0.9, &mut rng);
        let logits: Vec<f64> = (0..9).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let policy_of = |th: &[f64]| {
            let mut probs = Vec::new();
            for row in th.chunks(3) {
                let mx = row.iter().copied().fold(f64::MIN, f64::max);
                let e: Vec<f64> = row.iter().map(|l| (l - mx).exp()).collect();
                let s: f64 = e.iter().sum();
                probs.extend(e.iter().map(|v| v / s));
            }
            TabularPolicy::new(3, 3, probs).unwrap()
        };
        let lambda = 0.7;
        let objective = |th: &[f64]| {
            let pi = policy_of(th);
            let c = policy_evaluate(&m, &pi, Signal::Cost).unwrap()[0];
            let d = policy_evaluate(&m, &pi, Signal::Constraint).unwrap()[0];
            c + lambda * d
        };
        let grad = softmax_policy_gradient(&m, &policy_of(&logits), lambda).unwrap();
        let h = 1e-6;
        for i in 0..9 {
            let mut up = logits.clone();
            up[i] += h;
            let mut dn = logits.clone();
            dn[i] -= h;
            let fd = (objective(&up) - objective(&dn)) / (2.0 * h);
            assert_abs_diff_eq!(grad[i], fd, epsilon = 1e-7);
        }
    }
}
