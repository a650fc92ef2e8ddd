//! Dense two-phase simplex for small standard-form LPs:
//! `min cᵀx  s.t.  A x = b,  x ≥ 0`.
//!
//! Bland's rule guarantees termination. The final basic solution is
//! recomputed from the original data with an LU solve, which removes the
//! drift accumulated in the tableau.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Unbounded;

struct Tableau {
    rows: usize,
    cols: usize,
    // (rows + 1) x (cols + 1); last row is the objective, last column the rhs
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * (self.cols + 1) + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.at(pr, pc);
        for c in 0..w {
            *self.at_mut(pr, c) /= p;
        }
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f == 0.0 {
                continue;
            }
            for c in 0..w {
                let v = self.at(pr, c);
                *self.at_mut(r, c) -= f * v;
            }
        }
        self.basis[pr] = pc;
    }

    /// Runs Bland's rule over columns `< active_cols`.
    fn optimize(&mut self, active_cols: usize) -> std::result::Result<(), Unbounded> {
        let max_iter = 50_000;
        for _ in 0..max_iter {
            let entering = (0..active_cols).find(|&c| self.at(self.rows, c) < -PIVOT_TOL);
            let Some(pc) = entering else {
                return Ok(());
            };
            let mut best: Option<(f64, usize)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.at(r, self.cols) / a;
                    best = match best {
                        None => Some((ratio, r)),
                        Some((br, brow)) => {
                            if ratio < br - 1e-14
                                || (ratio <= br + 1e-14 && self.basis[r] < self.basis[brow])
                            {
                                Some((ratio, r))
                            } else {
                                Some((br, brow))
                            }
                        }
                    };
                }
            }
            let Some((_, pr)) = best else {
                return Err(Unbounded);
            };
            self.pivot(pr, pc);
        }
        Err(Unbounded)
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.cols + 1;
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }
}

/// Solves `min cᵀx s.t. A x = b, x ≥ 0` with `A` given row-major (`m × n`).
pub fn solve_standard_form(a: &[f64], b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let m = b.len();
    let n = c.len();
    if a.len() != m * n {
        return Err(Error::DimensionMismatch {
            context: "lp constraint matrix",
            expected: m * n,
            actual: a.len(),
        });
    }
    let cols = n + m;
    let w = cols + 1;
    let mut data = vec![0.0; (m + 1) * w];
    for r in 0..m {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            data[r * w + j] = sign * a[r * n + j];
        }
        data[r * w + n + r] = 1.0;
        data[r * w + cols] = sign * b[r];
    }
    // phase-one objective: sum of artificials, expressed in nonbasic terms
    for r in 0..m {
        for j in 0..n {
            data[m * w + j] -= data[r * w + j];
        }
        data[m * w + cols] -= data[r * w + cols];
    }
    let mut t = Tableau {
        rows: m,
        cols,
        data,
        basis: (n..n + m).collect(),
    };
    t.optimize(cols).map_err(|_| Error::Invariant("phase one cannot be unbounded".into()))?;
    if -t.at(t.rows, cols) > FEAS_TOL {
        return Err(Error::Infeasible);
    }

    // drive remaining artificials out of the basis
    let mut r = 0;
    while r < t.rows {
        if t.basis[r] >= n {
            match (0..n).find(|&j| t.at(r, j).abs() > 1e-9) {
                Some(j) => {
                    t.pivot(r, j);
                    r += 1;
                }
                None => t.remove_row(r),
            }
        } else {
            r += 1;
        }
    }

    // phase two
    for j in 0..w {
        *t.at_mut(t.rows, j) = 0.0;
    }
    for j in 0..n {
        *t.at_mut(t.rows, j) = c[j];
    }
    for r in 0..t.rows {
        let bj = t.basis[r];
        let f = t.at(t.rows, bj);
        if f != 0.0 {
            for j in 0..w {
                let v = t.at(r, j);
                *t.at_mut(t.rows, j) -= f * v;
            }
        }
    }
    // artificial columns are frozen out of phase two
    t.optimize(n)
        .map_err(|_| Error::InvalidArgument("linear program is unbounded".into()))?;

    let x = polish(a, b, n, &t)?;
    let objective = x.iter().zip(c).map(|(x, c)| x * c).sum();
    Ok(LpSolution { x, objective })
}

/// Recomputes the basic solution from the original rows kept in the tableau.
fn polish(a: &[f64], b: &[f64], n: usize, t: &Tableau) -> Result<Vec<f64>> {
    let k = t.rows;
    let mut x = vec![0.0; n];
    if k == 0 {
        return Ok(x);
    }
    // Rows may have been dropped as redundant, so solve over every original
    // row in the least-squares sense; the system is consistent.
    let m = b.len();
    let mut bm = DMatrix::zeros(m, k);
    for (col, &j) in t.basis.iter().enumerate() {
        for r in 0..m {
            bm[(r, col)] = a[r * n + j];
        }
    }
    let rhs = DVector::from_column_slice(b);
    let xb = bm
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map_err(|_| Error::Singular("simplex basis"))?;
    for (col, &j) in t.basis.iter().enumerate() {
        let tableau_value = t.at(col, t.cols);
        let v = if xb[col].is_finite() && (xb[col] - tableau_value).abs() < 1e-6 {
            xb[col]
        } else {
            tableau_value
        };
        x[j] = v.max(0.0);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let a = [1.0, 2.0, 1.0, 0.0, 3.0, 1.0, 0.0, 1.0];
        let sol = solve_standard_form(&a, &[4.0, 6.0], &[-1.0, -1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(sol.x[0], 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.objective, -2.8, epsilon = 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        // x + y = 1, x + y = 2
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(matches!(solve_standard_form(&a, &[1.0, 2.0], &[0.0, 0.0]), Err(Error::Infeasible)));
    }

    #[test]
    fn handles_redundant_rows_and_negative_rhs() {
        // -x - y = -2 twice, min x
        let a = [-1.0, -1.0, -1.0, -1.0];
        let sol = solve_standard_form(&a, &[-2.0, -2.0], &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(sol.x[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn detects_unbounded() {
        // x - y = 0, min -x
        let a = [1.0, -1.0];
        assert!(solve_standard_form(&a, &[0.0], &[-1.0, 0.0]).is_err());
    }
}
