//! Dense two-phase tableau simplex with Bland's rule.

use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Equality duals `y` with `Aᵀy ≤ c` and `bᵀy` equal to the optimum.
    pub y: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row; the last entry holds minus the objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in &mut self.rows[r] {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
        self.basis[r] = c;
        self.iterations += 1;
    }

    fn set_cost(&mut self, c: &[f64]) {
        let width = self.cost.len();
        self.cost = vec![0.0; width];
        self.cost[..c.len()].copy_from_slice(c);
        for (r, &j) in self.basis.iter().enumerate() {
            let cj = self.cost[j];
            if cj != 0.0 {
                for (v, rv) in self.cost.iter_mut().zip(&self.rows[r]) {
                    *v -= cj * rv;
                }
            }
        }
    }

    /// Runs Bland's rule over columns `< allowed`; returns false if unbounded.
    fn optimize(&mut self, allowed: usize, max_iter: usize) -> Result<bool> {
        let rhs = self.cost.len() - 1;
        loop {
            let Some(c) = (0..allowed).find(|&j| self.cost[j] < -PIVOT_TOL) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if row[c] > PIVOT_TOL {
                    let ratio = row[rhs] / row[c];
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - 1e-13 || (ratio <= lratio + 1e-13 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            if self.iterations >= max_iter {
                return Err(Error::Numerical(format!("simplex exceeded {max_iter} pivots")));
            }
            self.pivot(r, c);
        }
    }
}

/// Minimizes `cᵀx` subject to `A x = b`, `x ≥ 0`.
///
/// Phase one drives artificial variables (one per row) to zero. Artificials
/// left in the basis on rows with no other nonzero entry mark redundant
/// equations; they stay basic at level zero and never re-enter.
pub fn solve_standard_form(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension("inconsistent LP dimensions".into()));
    }
    let width = n + m + 1;
    let mut signs = vec![1.0; m];
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
            signs[i] = s;
            let mut row = vec![0.0; width];
            for j in 0..n {
                row[j] = s * a[i][j];
            }
            row[n + i] = 1.0;
            row[width - 1] = s * b[i];
            row
        })
        .collect();
    let mut t = Tableau {
        rows,
        cost: vec![0.0; width],
        basis: (n..n + m).collect(),
        iterations: 0,
    };
    let max_iter = 50 * (n + m) + 1000;
    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|v| *v = 1.0);
    t.set_cost(&phase1);
    t.optimize(n + m, max_iter)?;
    let infeasibility = -t.cost[width - 1];
    let scale = 1.0 + b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if infeasibility > 1e-9 * scale {
        return Err(Error::Infeasible(format!(
            "phase one ended with infeasibility {infeasibility:e}"
        )));
    }
    for r in 0..m {
        if t.basis[r] >= n {
            if let Some(c) = (0..n).find(|&j| t.rows[r][j].abs() > 1e-9) {
                t.pivot(r, c);
            }
        }
    }
    let mut phase2 = c.to_vec();
    phase2.extend(std::iter::repeat_n(0.0, m));
    t.set_cost(&phase2);
    if !t.optimize(n, max_iter)? {
        return Err(Error::Numerical("LP is unbounded".into()));
    }
    let mut x = vec![0.0; n];
    for (r, &j) in t.basis.iter().enumerate() {
        if j < n {
            x[j] = t.rows[r][width - 1];
        }
    }
    // y = c_Bᵀ B⁻¹, and B⁻¹ sits in the artificial columns of the tableau.
    let y = (0..m)
        .map(|i| {
            let v: f64 = t
                .basis
                .iter()
                .enumerate()
                .map(|(r, &j)| phase2[j] * t.rows[r][n + i])
                .sum();
            v * signs[i]
        })
        .collect();
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution {
        x,
        y,
        objective,
        iterations: t.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp_with_duals() {
        // min −x₁ − 2x₂ s.t. x₁ + x₂ + s₁ = 4, x₁ + 3x₂ + s₂ = 6.
        let a = vec![vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 3.0, 0.0, 1.0]];
        let b = vec![4.0, 6.0];
        let c = vec![-1.0, -2.0, 0.0, 0.0];
        let s = solve_standard_form(&a, &b, &c).unwrap();
        assert!((s.objective + 5.0).abs() < 1e-12);
        assert!((s.x[0] - 3.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
        let dual: f64 = s.y.iter().zip(&b).map(|(y, b)| y * b).sum();
        assert!((dual - s.objective).abs() < 1e-12);
        for j in 0..4 {
            let aty: f64 = (0..2).map(|i| a[i][j] * s.y[i]).sum();
            assert!(aty <= c[j] + 1e-12);
        }
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        let a = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![-1.0, 0.0]];
        let b = vec![1.0, 2.0, -0.25];
        let s = solve_standard_form(&a, &b, &[1.0, 2.0]).unwrap();
        assert!((s.objective - 1.75).abs() < 1e-12);
        let dual: f64 = s.y.iter().zip(&b).map(|(y, b)| y * b).sum();
        assert!((dual - 1.75).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let a = vec![vec![1.0, 1.0]];
        assert!(matches!(
            solve_standard_form(&a, &[-1.0], &[0.0, 0.0]),
            Err(Error::Infeasible(_))
        ));
        let a = vec![vec![1.0, -1.0]];
        assert!(matches!(
            solve_standard_form(&a, &[0.0], &[-1.0, 0.0]),
            Err(Error::Numerical(_))
        ));
    }
}
