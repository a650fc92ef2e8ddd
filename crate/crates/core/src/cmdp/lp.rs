//! Exact CMDP solution through the occupancy-measure linear program.
//!
//! Variables are normalized occupancies `μ(x,a) = (1−γ) Σ_t γ^t Pr(x_t=x, a_t=a)`,
//! so the flow constraints read
//! `Σ_a μ(x,a) − γ Σ_{x',a'} P(x|x',a') μ(x',a') = (1−γ) 1{x = x0}`
//! and the safety constraint `Σ μ(x,a) d(x) ≤ (1−γ) d0`. The objective
//! `Σ μ c` is divided by `(1−γ)` on the way out, so the reported value is in
//! the same units as `C_π(x0)`.

use super::model::{TabularCmdp, TabularPolicy};
use super::simplex::solve_standard_form;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct CmdpOptimum {
    /// Optimal `C(x0)`.
    pub value: f64,
    pub policy: TabularPolicy,
    /// Normalized state-action occupancy, row-major.
    pub occupancy: Vec<f64>,
}

pub fn lp_optimal_cmdp(cmdp: &TabularCmdp) -> Result<CmdpOptimum> {
    let (ns, na, gamma) = (cmdp.n_states(), cmdp.n_actions(), cmdp.gamma());
    let nsa = ns * na;
    let constrained = cmdp.is_constrained();
    let n = nsa + usize::from(constrained);
    let m = ns + usize::from(constrained);

    let mut a = vec![0.0; m * n];
    let mut b = vec![0.0; m];
    for x in 0..ns {
        for y in 0..ns {
            for u in 0..na {
                let col = y * na + u;
                let mut v = -gamma * cmdp.p(y, u, x);
                if x == y {
                    v += 1.0;
                }
                a[x * n + col] = v;
            }
        }
        if x == cmdp.x0() {
            b[x] = 1.0 - gamma;
        }
    }
    if constrained {
        let row = ns;
        for y in 0..ns {
            for u in 0..na {
                a[row * n + y * na + u] = cmdp.constraint_cost(y);
            }
        }
        a[row * n + nsa] = 1.0;
        b[row] = (1.0 - gamma) * cmdp.d0();
    }
    let mut c = cmdp.cost_matrix().to_vec();
    if constrained {
        c.push(0.0);
    }

    let sol = solve_standard_form(&a, &b, &c)?;
    let occupancy = sol.x[..nsa].to_vec();
    let mut probs = vec![0.0; nsa];
    for x in 0..ns {
        let row = &occupancy[x * na..(x + 1) * na];
        let total: f64 = row.iter().sum();
        if total > 1e-14 {
            for u in 0..na {
                probs[x * na + u] = row[u] / total;
            }
            let s: f64 = probs[x * na..(x + 1) * na].iter().sum();
            for p in &mut probs[x * na..(x + 1) * na] {
                *p /= s;
            }
        } else {
            // unreachable under the optimum: any action will do
            probs[x * na] = 1.0;
        }
    }
    let policy = TabularPolicy::new(ns, na, probs)?;
    Ok(CmdpOptimum {
        value: sol.objective / (1.0 - gamma),
        policy,
        occupancy,
    })
}
