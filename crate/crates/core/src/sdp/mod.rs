//! Block-diagonal conic programs and a primal-dual interior-point solver.
//!
//! Standard form, with `X = diag(X₁, …, X_K)` and each block either positive
//! semidefinite or a nonnegative diagonal:
//!
//! ```text
//! primal:  minimize ⟨C, X⟩   subject to ⟨A_j, X⟩ = b_j,  X ⪰ 0
//! dual:    maximize bᵀy      subject to S = C − Σ_j y_j A_j ⪰ 0
//! ```
//!
//! Symmetric data matrices are stored as sparse upper-triangle entries.

mod bridge;
mod preprocess;
mod sdpa;
mod solver;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use bridge::{solve_with_backend, FileBridge, SolverBackend, BRIDGE_CMD_ENV, SOLVER_ENV};
pub use preprocess::{preprocess, Preprocessed};
pub use sdpa::{emit_sdpa, format_sdpa_float, parse_sdpa, parse_sdpa_solution};
pub use solver::solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Psd,
    /// Nonnegative orthant, stored as the diagonal of a matrix block.
    Diag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub size: usize,
}

impl Block {
    pub fn psd(size: usize) -> Self {
        Self {
            kind: BlockKind::Psd,
            size,
        }
    }

    pub fn diag(size: usize) -> Self {
        Self {
            kind: BlockKind::Diag,
            size,
        }
    }
}

/// Upper-triangle entry `(block, i, j, value)` with `i ≤ j` of a symmetric
/// block matrix; the mirrored entry is implied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

impl Entry {
    pub fn new(block: usize, i: usize, j: usize, value: f64) -> Self {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        Self { block, i, j, value }
    }
}

/// Sorts, merges duplicates and drops zeros.
fn canonical(mut entries: Vec<Entry>) -> Vec<Entry> {
    for e in &mut entries {
        if e.i > e.j {
            std::mem::swap(&mut e.i, &mut e.j);
        }
    }
    entries.sort_by_key(|e| (e.block, e.i, e.j));
    let mut out: Vec<Entry> = Vec::with_capacity(entries.len());
    for e in entries {
        match out.last_mut() {
            Some(last) if (last.block, last.i, last.j) == (e.block, e.i, e.j) => last.value += e.value,
            _ => out.push(e),
        }
    }
    out.retain(|e| e.value != 0.0);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    blocks: Vec<Block>,
    c: Vec<Entry>,
    a: Vec<Vec<Entry>>,
    b: Vec<f64>,
}

impl ConicProgram {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() || blocks.iter().any(|b| b.size == 0) {
            return Err(Error::Dimension("conic program needs nonempty blocks".into()));
        }
        Ok(Self {
            blocks,
            c: Vec::new(),
            a: Vec::new(),
            b: Vec::new(),
        })
    }

    fn check(&self, entries: &[Entry]) -> Result<()> {
        for e in entries {
            let blk = self
                .blocks
                .get(e.block)
                .ok_or_else(|| Error::Dimension(format!("block {} does not exist", e.block)))?;
            if e.i.max(e.j) >= blk.size {
                return Err(Error::Dimension(format!(
                    "entry ({}, {}) outside block {} of size {}",
                    e.i, e.j, e.block, blk.size
                )));
            }
            if blk.kind == BlockKind::Diag && e.i != e.j {
                return Err(Error::Dimension(format!(
                    "off-diagonal entry in diagonal block {}",
                    e.block
                )));
            }
            if !e.value.is_finite() {
                return Err(Error::Numerical("non-finite data entry".into()));
            }
        }
        Ok(())
    }

    pub fn set_objective(&mut self, entries: Vec<Entry>) -> Result<()> {
        self.check(&entries)?;
        self.c = canonical(entries);
        Ok(())
    }

    /// Appends `⟨A, X⟩ = rhs` and returns its index.
    pub fn add_constraint(&mut self, entries: Vec<Entry>, rhs: f64) -> Result<usize> {
        self.check(&entries)?;
        if !rhs.is_finite() {
            return Err(Error::Numerical("non-finite right-hand side".into()));
        }
        self.a.push(canonical(entries));
        self.b.push(rhs);
        Ok(self.a.len() - 1)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn objective(&self) -> &[Entry] {
        &self.c
    }

    pub fn constraints(&self) -> &[Vec<Entry>] {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn num_constraints(&self) -> usize {
        self.a.len()
    }

    /// Returns a copy with the objective multiplied by `factor`.
    pub fn scale_objective(&self, factor: f64) -> Self {
        let mut p = self.clone();
        p.c.iter_mut().for_each(|e| e.value *= factor);
        p
    }

    /// Zero matrices shaped like the blocks.
    pub fn zero_blocks(&self) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| DMatrix::zeros(b.size, b.size)).collect()
    }

    /// Dense symmetric block matrices from sparse entries.
    pub fn densify(&self, entries: &[Entry]) -> Vec<DMatrix<f64>> {
        let mut out = self.zero_blocks();
        for e in entries {
            out[e.block][(e.i, e.j)] += e.value;
            if e.i != e.j {
                out[e.block][(e.j, e.i)] += e.value;
            }
        }
        out
    }

    /// `⟨A_j, X⟩` for every constraint.
    pub fn apply(&self, x: &[DMatrix<f64>]) -> Vec<f64> {
        self.a.iter().map(|a| inner_sparse(a, x)).collect()
    }

    /// `Σ_j y_j A_j` as dense blocks.
    pub fn adjoint(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out = self.zero_blocks();
        for (a, &yj) in self.a.iter().zip(y) {
            if yj == 0.0 {
                continue;
            }
            for e in a {
                out[e.block][(e.i, e.j)] += yj * e.value;
                if e.i != e.j {
                    out[e.block][(e.j, e.i)] += yj * e.value;
                }
            }
        }
        out
    }
}

/// `⟨A, X⟩` for sparse upper-triangle `A` and dense symmetric `X`.
pub(crate) fn inner_sparse(a: &[Entry], x: &[DMatrix<f64>]) -> f64 {
    a.iter()
        .map(|e| {
            let v = e.value * x[e.block][(e.i, e.j)];
            if e.i == e.j {
                v
            } else {
                2.0 * v
            }
        })
        .sum()
}

pub(crate) fn inner_dense(x: &[DMatrix<f64>], y: &[DMatrix<f64>]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.dot(b)).sum()
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    /// The primal constraints admit no positive semidefinite solution.
    Infeasible,
    /// The primal objective is unbounded below.
    Unbounded,
    /// Stopped early with every residual and the gap within 1000 times
    /// the requested tolerances. Not a certified optimum.
    NearOptimal,
    /// Iteration cap or numerical breakdown before any certificate.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub status: Status,
    #[serde(skip)]
    pub x: Vec<DMatrix<f64>>,
    #[serde(skip)]
    pub s: Vec<DMatrix<f64>>,
    #[serde(skip)]
    pub y: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|⟨C,X⟩ − bᵀy| / (1 + |⟨C,X⟩| + |bᵀy|)`.
    pub relative_gap: f64,
    /// `‖𝒜X − b‖ / (1 + ‖b‖)`.
    pub primal_residual: f64,
    /// `‖C − 𝒜ᵀy − S‖ / (1 + ‖C‖)`.
    pub dual_residual: f64,
    pub iterations: usize,
}

impl Solution {
    /// Wraps a primal-dual point, computing objectives and relative
    /// residuals from the program data.
    pub fn evaluate(
        program: &ConicProgram,
        status: Status,
        x: Vec<DMatrix<f64>>,
        s: Vec<DMatrix<f64>>,
        y: Vec<f64>,
        iterations: usize,
    ) -> Self {
        let norm_b = program.b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let c = program.densify(&program.c);
        let norm_c = c.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
        let primal_residual = program
            .apply(&x)
            .iter()
            .zip(&program.b)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
            / (1.0 + norm_b);
        let aty = program.adjoint(&y);
        let dual_residual = (0..c.len())
            .map(|k| (&c[k] - &aty[k] - &s[k]).norm_squared())
            .sum::<f64>()
            .sqrt()
            / (1.0 + norm_c);
        let primal_objective = inner_sparse(&program.c, &x);
        let dual_objective: f64 = program.b.iter().zip(&y).map(|(b, y)| b * y).sum();
        Self {
            status,
            x,
            s,
            y,
            primal_objective,
            dual_objective,
            relative_gap: (primal_objective - dual_objective).abs()
                / (1.0 + primal_objective.abs() + dual_objective.abs()),
            primal_residual,
            dual_residual,
            iterations,
        }
    }
}

/// Solver-independent check of a candidate primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyReport {
    /// Largest `|⟨A_j,X⟩ − b_j|`.
    pub primal_residual: f64,
    /// Largest entry of `|C − Σ y_j A_j − S|`.
    pub dual_residual: f64,
    pub min_eig_x: f64,
    pub min_eig_s: f64,
    /// `⟨X, S⟩`.
    pub complementarity: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|⟨C,X⟩ − bᵀy| / (1 + |⟨C,X⟩| + |bᵀy|)`.
    pub relative_gap: f64,
}

impl VerifyReport {
    /// All residuals, cone violations and the relative gap within `tol`.
    pub fn passed(&self, tol: f64) -> bool {
        let scale = 1.0 + self.primal_objective.abs().max(self.dual_objective.abs());
        self.primal_residual <= tol * scale
            && self.dual_residual <= tol * scale
            && self.min_eig_x >= -tol * scale
            && self.min_eig_s >= -tol * scale
            && self.relative_gap <= tol
    }
}

/// Recomputes residuals, cone membership, complementarity and the gap from
/// the program data alone.
pub fn verify_solution(program: &ConicProgram, solution: &Solution) -> Result<VerifyReport> {
    let shapes_ok = |m: &[DMatrix<f64>]| {
        m.len() == program.blocks.len()
            && m.iter()
                .zip(&program.blocks)
                .all(|(x, b)| x.nrows() == b.size && x.ncols() == b.size)
    };
    if !shapes_ok(&solution.x) || !shapes_ok(&solution.s) || solution.y.len() != program.a.len() {
        return Err(Error::Dimension("solution shape does not match program".into()));
    }
    let ax = program.apply(&solution.x);
    let primal_residual = ax
        .iter()
        .zip(&program.b)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let c = program.densify(&program.c);
    let aty = program.adjoint(&solution.y);
    let mut dual_residual = 0.0f64;
    for k in 0..c.len() {
        let r = &c[k] - &aty[k] - &solution.s[k];
        dual_residual = dual_residual.max(r.amax());
    }
    let cone_min = |m: &[DMatrix<f64>]| -> f64 {
        m.iter()
            .zip(&program.blocks)
            .map(|(x, b)| match b.kind {
                BlockKind::Psd => min_eig(x),
                BlockKind::Diag => x.diagonal().min(),
            })
            .fold(f64::INFINITY, f64::min)
    };
    let primal_objective = inner_sparse(&program.c, &solution.x);
    let dual_objective: f64 = program.b.iter().zip(&solution.y).map(|(b, y)| b * y).sum();
    Ok(VerifyReport {
        primal_residual,
        dual_residual,
        min_eig_x: cone_min(&solution.x),
        min_eig_s: cone_min(&solution.s),
        complementarity: inner_dense(&solution.x, &solution.s),
        primal_objective,
        dual_objective,
        relative_gap: (primal_objective - dual_objective).abs() / (1.0 + primal_objective.abs() + dual_objective.abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ConicProgram {
        // minimize x subject to x = 1 + t, t ⪰ 0 written as a 1×1 block X = x − 1.
        let mut p = ConicProgram::new(vec![Block::psd(1)]).unwrap();
        p.set_objective(vec![Entry::new(0, 0, 0, 1.0)]).unwrap();
        p.add_constraint(vec![Entry::new(0, 0, 0, 1.0)], 1.0).unwrap();
        p
    }

    #[test]
    fn builder_canonicalizes_entries() {
        let mut p = ConicProgram::new(vec![Block::psd(3), Block::diag(2)]).unwrap();
        p.add_constraint(
            vec![
                Entry::new(0, 2, 1, 1.0),
                Entry::new(0, 1, 2, 0.5),
                Entry::new(1, 1, 1, 0.0),
            ],
            3.0,
        )
        .unwrap();
        assert_eq!(p.constraints()[0], vec![Entry::new(0, 1, 2, 1.5)]);
        assert!(p.add_constraint(vec![Entry::new(1, 0, 1, 1.0)], 0.0).is_err());
        assert!(p.add_constraint(vec![Entry::new(0, 0, 3, 1.0)], 0.0).is_err());
        assert!(p.add_constraint(vec![Entry::new(2, 0, 0, 1.0)], 0.0).is_err());
    }

    #[test]
    fn verify_flags_perturbations() {
        let p = toy();
        let good = Solution {
            status: Status::Optimal,
            x: vec![DMatrix::from_element(1, 1, 1.0)],
            s: vec![DMatrix::from_element(1, 1, 0.0)],
            y: vec![1.0],
            primal_objective: 1.0,
            dual_objective: 1.0,
            relative_gap: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
        };
        let r = verify_solution(&p, &good).unwrap();
        assert!(r.passed(1e-12));
        let mut bad = good.clone();
        bad.x[0][(0, 0)] += 1e-3;
        let r = verify_solution(&p, &bad).unwrap();
        assert!((r.primal_residual - 1e-3).abs() < 1e-15);
        assert!(!r.passed(1e-6));
    }

    #[test]
    fn verify_detects_negative_eigenvalue() {
        let mut p = ConicProgram::new(vec![Block::psd(2)]).unwrap();
        p.add_constraint(vec![Entry::new(0, 0, 0, 1.0), Entry::new(0, 1, 1, 1.0)], 1.0)
            .unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 0.5]);
        let sol = Solution {
            status: Status::Optimal,
            x: vec![x],
            s: vec![DMatrix::zeros(2, 2)],
            y: vec![0.0],
            primal_objective: 0.0,
            dual_objective: 0.0,
            relative_gap: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
        };
        let r = verify_solution(&p, &sol).unwrap();
        assert!((r.min_eig_x + 0.5).abs() < 1e-12);
        assert!(!r.passed(1e-6));
    }
}
