//! Safe policy iteration.

use super::eval::{policy_evaluate, q_values, Signal};
use super::lyapunov::{epsilon_constant, epsilon_state_dependent, lyapunov_bundle, FEASIBILITY_TOL};
use super::model::{TabularCmdp, TabularPolicy};
use crate::error::{Error, Result};

/// How the auxiliary constraint cost is rebuilt at every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpsilonRule {
    /// `(1−γ)(d0 − D_πB(x0))` at every state.
    Constant,
    /// The one-hot maximizer of the auxiliary-cost LP.
    #[default]
    StateDependent,
}

/// Objective ties below this are resolved in favour of the baseline row.
const TIE_TOL: f64 = 1e-13;
/// Slack on the per-state constraint when screening pure actions.
const ROW_TOL: f64 = 1e-12;

/// Solves `min_π Σ_a π(a) q(a)` over the simplex subject to `Σ_a π(a) l(a) ≤ budget`.
///
/// The optimum of an LP over the simplex with one extra inequality sits on a
/// vertex of the cut polytope: either a pure action satisfying the
/// constraint, or a two-action mixture lying on the constraint boundary.
/// Enumerating those vertices gives the exact solution. Ties prefer the
/// smaller constraint usage. Returns `None` when no action satisfies the budget.
pub fn solve_state_lp(q: &[f64], l: &[f64], budget: f64) -> Option<Vec<f64>> {
    let n = q.len();
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    let mut consider = |obj: f64, usage: f64, row: Vec<f64>| {
        let better = match &best {
            None => true,
            Some((bo, bu, _)) => obj < bo - TIE_TOL || (obj <= bo + TIE_TOL && usage < *bu),
        };
        if better {
            best = Some((obj, usage, row));
        }
    };
    for a in 0..n {
        if l[a] <= budget + ROW_TOL {
            let mut row = vec![0.0; n];
            row[a] = 1.0;
            consider(q[a], l[a], row);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if l[i] < budget && l[j] > budget {
                let p = (budget - l[i]) / (l[j] - l[i]);
                if !(0.0..=1.0).contains(&p) {
                    continue;
                }
                let mut row = vec![0.0; n];
                row[i] = 1.0 - p;
                row[j] = p;
                let usage = (1.0 - p) * l[i] + p * l[j];
                consider((1.0 - p) * q[i] + p * q[j], usage, row);
            }
        }
    }
    best.map(|(_, _, row)| row)
}

/// One safe policy improvement step with the default auxiliary-cost rule.
pub fn spi_step(cmdp: &TabularCmdp, current: &TabularPolicy) -> Result<TabularPolicy> {
    spi_step_with(cmdp, current, EpsilonRule::default())
}

pub fn spi_step_with(cmdp: &TabularCmdp, current: &TabularPolicy, rule: EpsilonRule) -> Result<TabularPolicy> {
    current.check_against(cmdp)?;
    let (ns, na) = (cmdp.n_states(), cmdp.n_actions());
    let v = policy_evaluate(cmdp, current, Signal::Cost)?;
    let qv = q_values(cmdp, cmdp.cost_matrix(), &v);

    if !cmdp.is_constrained() {
        let mut next = current.clone();
        for x in 0..ns {
            let q = &qv[x * na..(x + 1) * na];
            let baseline_obj: f64 = current.row(x).iter().zip(q).map(|(p, q)| p * q).sum();
            let (arg, min) = q
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |(ba, bq), (a, &q)| if q < bq { (a, q) } else { (ba, bq) });
            if min < baseline_obj - TIE_TOL {
                let mut row = vec![0.0; na];
                row[arg] = 1.0;
                next.set_row(x, &row);
            }
        }
        return Ok(next);
    }

    let eps = match rule {
        EpsilonRule::Constant => vec![epsilon_constant(cmdp, current)?; ns],
        EpsilonRule::StateDependent => epsilon_state_dependent(cmdp, current)?,
    };
    let bundle = lyapunov_bundle(cmdp, current, &eps)?;
    let mut next = current.clone();
    for x in 0..ns {
        let q = &qv[x * na..(x + 1) * na];
        let l = &bundle.ql[x * na..(x + 1) * na];
        let baseline_usage: f64 = current.row(x).iter().zip(l).map(|(p, l)| p * l).sum();
        let baseline_obj: f64 = current.row(x).iter().zip(q).map(|(p, q)| p * q).sum();
        let budget = eps[x] + baseline_usage;
        let row = solve_state_lp(q, l, budget).ok_or_else(|| {
            Error::Invariant(format!("per-state LP infeasible at state {x} with budget {budget}"))
        })?;
        let obj: f64 = row.iter().zip(q).map(|(p, q)| p * q).sum();
        if obj < baseline_obj - TIE_TOL {
            next.set_row(x, &row);
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpiIterate {
    pub iteration: usize,
    /// `C_πk(x0)`.
    pub cost: f64,
    /// `D_πk(x0)`.
    pub constraint: f64,
}

#[derive(Debug, Clone)]
pub struct SpiOutcome {
    pub policy: TabularPolicy,
    /// Iterate 0 is the initial policy.
    pub log: Vec<SpiIterate>,
    pub converged: bool,
}

/// Runs safe policy iteration until the cost at `x0` improves by less than `tol`.
pub fn spi_run(cmdp: &TabularCmdp, initial: &TabularPolicy, max_iters: usize, tol: f64) -> Result<SpiOutcome> {
    spi_run_with(cmdp, initial, max_iters, tol, EpsilonRule::default())
}

pub fn spi_run_with(
    cmdp: &TabularCmdp,
    initial: &TabularPolicy,
    max_iters: usize,
    tol: f64,
    rule: EpsilonRule,
) -> Result<SpiOutcome> {
    initial.check_against(cmdp)?;
    let x0 = cmdp.x0();
    let eval = |pi: &TabularPolicy| -> Result<(f64, f64)> {
        Ok((
            policy_evaluate(cmdp, pi, Signal::Cost)?[x0],
            policy_evaluate(cmdp, pi, Signal::Constraint)?[x0],
        ))
    };
    let (mut cost, constraint) = eval(initial)?;
    if constraint > cmdp.d0() + FEASIBILITY_TOL {
        return Err(Error::InfeasibleBaseline {
            value: constraint,
            threshold: cmdp.d0(),
        });
    }
    let mut log = vec![SpiIterate {
        iteration: 0,
        cost,
        constraint,
    }];
    let mut current = initial.clone();
    let mut converged = false;
    for k in 1..=max_iters {
        let next = spi_step_with(cmdp, &current, rule)?;
        let (c, d) = eval(&next)?;
        log.push(SpiIterate {
            iteration: k,
            cost: c,
            constraint: d,
        });
        let improvement = cost - c;
        current = next;
        cost = c;
        if improvement < tol {
            converged = true;
            break;
        }
    }
    Ok(SpiOutcome {
        policy: current,
        log,
        converged,
    })
}

/// Deterministic policy minimizing the discounted accumulation of `h` from every
/// state, by policy iteration. Useful for finding a feasible starting point
/// (`h = d`) or the unconstrained optimum (`h = c`).
pub fn optimal_deterministic_policy(cmdp: &TabularCmdp, h: &[f64]) -> Result<TabularPolicy> {
    let (ns, na) = (cmdp.n_states(), cmdp.n_actions());
    let mut choice = vec![0usize; ns];
    for _ in 0..10_000 {
        let pi = TabularPolicy::deterministic(na, &choice);
        let v = super::eval::evaluate_cost(cmdp, &pi, h)?;
        let q = q_values(cmdp, h, &v);
        let mut changed = false;
        for x in 0..ns {
            let cur = q[x * na + choice[x]];
            let (arg, min) = (0..na).fold((choice[x], cur), |(ba, bq), a| {
                let qa = q[x * na + a];
                if qa < bq - 1e-12 {
                    (a, qa)
                } else {
                    (ba, bq)
                }
            });
            if min < cur - 1e-12 {
                choice[x] = arg;
                changed = true;
            }
        }
        if !changed {
            return Ok(pi);
        }
    }
    Err(Error::Invariant("policy iteration did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::lp::lp_optimal_cmdp;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, ns: usize, na: usize, slack: f64) -> (TabularCmdp, TabularPolicy) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = TabularCmdp::random(ns, na, 0.9, &mut rng);
        let pi = TabularPolicy::random(ns, na, &mut rng);
        let d = policy_evaluate(&m, &pi, Signal::Constraint).unwrap()[0];
        (m.with_d0(d + slack), pi)
    }

    /// Brute force over a fine simplex grid, keeping the feasible minimum.
    fn grid_search(q: &[f64], l: &[f64], budget: f64, steps: usize) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let p = [i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64];
                let usage: f64 = p.iter().zip(l).map(|(p, l)| p * l).sum();
                if usage <= budget + 1e-12 {
                    best = best.min(p.iter().zip(q).map(|(p, q)| p * q).sum());
                }
            }
        }
        best
    }

    #[test]
    fn state_lp_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        use rand::Rng;
        for _ in 0..200 {
            let q: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let l: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let lo = l.iter().copied().fold(f64::INFINITY, f64::min);
            let budget = lo + rng.random::<f64>() * 0.8;
            let row = solve_state_lp(&q, &l, budget).unwrap();
            let obj: f64 = row.iter().zip(&q).map(|(p, q)| p * q).sum();
            let usage: f64 = row.iter().zip(&l).map(|(p, l)| p * l).sum();
            assert!(usage <= budget + 1e-12);
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            // the grid can only do worse than the exact vertex solution
            let grid = grid_search(&q, &l, budget, 400);
            assert!(obj <= grid + 1e-12);
            assert!(grid - obj < 5e-3, "grid {grid} vs exact {obj}");
        }
    }

    #[test]
    fn state_lp_none_when_budget_too_small() {
        assert!(solve_state_lp(&[0.0, 1.0], &[1.0, 2.0], 0.5).is_none());
    }

    #[test]
    fn huge_budget_gives_greedy_policy() {
        let (m, pi) = random_instance(3, 5, 3, 1e6);
        let next = spi_step_with(&m, &pi, EpsilonRule::Constant).unwrap();
        let v = policy_evaluate(&m, &pi, Signal::Cost).unwrap();
        let q = q_values(&m, m.cost_matrix(), &v);
        for x in 0..5 {
            let row = &q[x * 3..x * 3 + 3];
            let arg = (0..3).min_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap()).unwrap();
            assert_eq!(next.prob(x, arg), 1.0);
        }
    }

    #[test]
    fn zero_budget_keeps_constraint_optimal_baseline() {
        // two actions; action 0 is strictly safer everywhere, action 1 cheaper
        let t = vec![
            0.9, 0.1, 0.2, 0.8, //
            0.7, 0.3, 0.1, 0.9,
        ];
        let m = TabularCmdp::new(2, 2, t, vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0], 0.9, 0, 0.0).unwrap();
        let base = optimal_deterministic_policy(&m, &m.constraint_matrix()).unwrap();
        assert_eq!(base.probs(), &[1.0, 0.0, 1.0, 0.0]);
        let d = policy_evaluate(&m, &base, Signal::Constraint).unwrap()[0];
        let m = m.with_d0(d);
        let next = spi_step(&m, &base).unwrap();
        assert_eq!(next, base);
    }

    #[test]
    fn step_is_feasible_and_improving() {
        for seed in 0..30 {
            let (m, pi) = random_instance(seed, 5, 3, 0.5);
            for rule in [EpsilonRule::Constant, EpsilonRule::StateDependent] {
                let next = spi_step_with(&m, &pi, rule).unwrap();
                let d = policy_evaluate(&m, &next, Signal::Constraint).unwrap()[0];
                assert!(d <= m.d0() + 1e-8);
                let c0 = policy_evaluate(&m, &pi, Signal::Cost).unwrap();
                let c1 = policy_evaluate(&m, &next, Signal::Cost).unwrap();
                for x in 0..5 {
                    assert!(c1[x] <= c0[x] + 1e-8);
                }
            }
        }
    }

    #[test]
    fn run_from_optimum_stops_quickly() {
        let (m, _) = random_instance(12, 4, 2, 0.3);
        let opt = optimal_deterministic_policy(&m.clone().with_d0(f64::INFINITY), m.cost_matrix()).unwrap();
        let m = m.with_d0(1e6);
        let out = spi_run(&m, &opt, 50, 1e-10).unwrap();
        assert!(out.log.len() <= 3);
        assert_abs_diff_eq!(out.log.last().unwrap().cost, out.log[0].cost, epsilon = 1e-12);
    }

    #[test]
    fn one_state_converges_to_cheapest_action() {
        let m = TabularCmdp::new(1, 3, vec![1.0; 3], vec![0.6, 0.2, 0.9], vec![0.5], 0.8, 0, 3.0).unwrap();
        let out = spi_run(&m, &TabularPolicy::uniform(1, 3), 10, 1e-12).unwrap();
        assert_eq!(out.policy.row(0), &[0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(out.log[1].cost, 0.2 / 0.2, epsilon = 1e-12);
    }

    #[test]
    fn run_rejects_infeasible_initial() {
        let (m, pi) = random_instance(5, 3, 2, -0.5);
        assert!(matches!(spi_run(&m, &pi, 10, 1e-9), Err(Error::InfeasibleBaseline { .. })));
    }

    #[test]
    fn run_is_monotone_and_bounded_by_lp() {
        for seed in 40..60 {
            let (m, pi) = random_instance(seed, 5, 3, 0.4);
            let out = spi_run(&m, &pi, 200, 1e-10).unwrap();
            for w in out.log.windows(2) {
                assert!(w[1].cost <= w[0].cost + 1e-8);
                assert!(w[1].constraint <= m.d0() + 1e-8);
            }
            let lp = lp_optimal_cmdp(&m).unwrap();
            assert!(out.log.last().unwrap().cost >= lp.value - 1e-8);
        }
    }
}
