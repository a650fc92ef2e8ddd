//! Auxiliary constraint costs and the Lyapunov functions they induce.

use super::eval::{evaluate_cost, policy_evaluate, q_values, state_occupancy, Signal};
use super::model::{TabularCmdp, TabularPolicy};
use crate::error::{check_dim, Error, Result};

/// Slack allowed when deciding that a baseline is feasible. Exact evaluations of
/// policies sitting on the constraint boundary land within a few ulps of `d0`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// States whose discounted occupancy is below this are treated as unreachable.
const OCCUPANCY_FLOOR: f64 = 1e-12;

/// `ε̃(x)`, `L_ε̃`, `Q_L`, together with the plain constraint values `W = D_πB` and `Q_W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovBundle {
    pub epsilon: Vec<f64>,
    pub l: Vec<f64>,
    pub ql: Vec<f64>,
    pub w: Vec<f64>,
    pub qw: Vec<f64>,
}

/// Constraint budget `d0 − D_πB(x0)` left by the baseline.
pub fn constraint_budget(cmdp: &TabularCmdp, baseline: &TabularPolicy) -> Result<f64> {
    let d = policy_evaluate(cmdp, baseline, Signal::Constraint)?[cmdp.x0()];
    let d0 = cmdp.d0();
    if d > d0 + FEASIBILITY_TOL {
        return Err(Error::InfeasibleBaseline {
            value: d,
            threshold: d0,
        });
    }
    Ok((d0 - d).max(0.0))
}

/// Constant auxiliary cost `(1−γ)(d0 − D_πB(x0))`.
pub fn epsilon_constant(cmdp: &TabularCmdp, baseline: &TabularPolicy) -> Result<f64> {
    Ok((1.0 - cmdp.gamma()) * constraint_budget(cmdp, baseline)?)
}

/// One-hot maximizer of the auxiliary-cost LP: the whole budget is spent on the
/// reachable state with the smallest discounted occupancy under the baseline.
///
/// Unreachable states (zero occupancy) would make the LP unbounded and are
/// excluded from the argmin. Ties go to the lowest state index.
pub fn epsilon_state_dependent(cmdp: &TabularCmdp, baseline: &TabularPolicy) -> Result<Vec<f64>> {
    let budget = constraint_budget(cmdp, baseline)?;
    let mut eps = vec![0.0; cmdp.n_states()];
    if budget == 0.0 || budget.is_infinite() {
        if budget.is_infinite() {
            eps.fill(f64::INFINITY);
        }
        return Ok(eps);
    }
    let occ = state_occupancy(cmdp, baseline)?;
    let mut best: Option<usize> = None;
    for (x, &o) in occ.iter().enumerate() {
        if o <= OCCUPANCY_FLOOR {
            continue;
        }
        if best.is_none_or(|b| o < occ[b]) {
            best = Some(x);
        }
    }
    let x_min = best.ok_or_else(|| Error::Invariant("no reachable state".into()))?;
    eps[x_min] = budget / occ[x_min];
    Ok(eps)
}

/// Left-hand side of the auxiliary-cost budget constraint,
/// `1(x0)ᵀ (I − γ P_πB)^{-1} ε`, i.e. the discounted accumulated `ε` from `x0`.
pub fn auxiliary_budget_usage(cmdp: &TabularCmdp, baseline: &TabularPolicy, epsilon: &[f64]) -> Result<f64> {
    check_dim("epsilon", cmdp.n_states(), epsilon.len())?;
    let h = broadcast(cmdp, epsilon);
    Ok(evaluate_cost(cmdp, baseline, &h)?[cmdp.x0()])
}

/// Per-state `2 D_max TV(π_a(·|x), π_b(·|x)) / (1−γ)`. Diagnostic only.
pub fn epsilon_star_bound(cmdp: &TabularCmdp, pi_a: &TabularPolicy, pi_b: &TabularPolicy) -> Result<Vec<f64>> {
    pi_a.check_against(cmdp)?;
    pi_b.check_against(cmdp)?;
    let scale = 2.0 * cmdp.d_max() / (1.0 - cmdp.gamma());
    Ok((0..cmdp.n_states())
        .map(|x| {
            let tv = 0.5 * pi_a.row(x).iter().zip(pi_b.row(x)).map(|(a, b)| (a - b).abs()).sum::<f64>();
            scale * tv
        })
        .collect())
}

/// Lyapunov function `L_ε(x) = E[Σ γ^t (d(x_t) + ε(x_t)) | π_B, x]` and its
/// state-action form, plus the `ε ≡ 0` constraint values.
pub fn lyapunov_bundle(cmdp: &TabularCmdp, baseline: &TabularPolicy, epsilon: &[f64]) -> Result<LyapunovBundle> {
    check_dim("epsilon", cmdp.n_states(), epsilon.len())?;
    if epsilon.iter().any(|e| e.is_nan() || *e < 0.0) {
        return Err(Error::InvalidArgument("auxiliary cost must be nonnegative".into()));
    }
    let h_l = {
        let d = cmdp.constraint_costs();
        let aug: Vec<f64> = d.iter().zip(epsilon).map(|(d, e)| d + e).collect();
        broadcast(cmdp, &aug)
    };
    let l = evaluate_cost(cmdp, baseline, &h_l)?;
    let ql = q_values(cmdp, &h_l, &l);
    let h_w = cmdp.constraint_matrix();
    let w = evaluate_cost(cmdp, baseline, &h_w)?;
    let qw = q_values(cmdp, &h_w, &w);
    Ok(LyapunovBundle {
        epsilon: epsilon.to_vec(),
        l,
        ql,
        w,
        qw,
    })
}

fn broadcast(cmdp: &TabularCmdp, per_state: &[f64]) -> Vec<f64> {
    per_state
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, cmdp.n_actions()))
        .collect()
}
