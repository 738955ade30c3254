//! Small dense complex linear algebra on tensor-product spaces.
//!
//! Subsystem index convention: the first entry of `dims` is the most
//! significant digit of a basis index.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{CMatrix, C64};
use crate::{Error, Result};

pub fn zeros(n: usize) -> CMatrix {
    DMatrix::from_element(n, n, C64::new(0.0, 0.0))
}

pub fn identity(n: usize) -> CMatrix {
    DMatrix::identity(n, n)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all<'a, I: IntoIterator<Item = &'a CMatrix>>(ops: I) -> CMatrix {
    ops.into_iter().fold(identity(1), |acc, op| acc.kronecker(op))
}

/// Largest absolute deviation from Hermiticity.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix.
///
/// Eigenvalues come back ascending. Each eigenvector is phase-fixed so that
/// its first component with modulus above `1e-12` is real and positive.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = zeros(n);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let phase = v
            .iter()
            .find(|z| z.norm() > 1e-12)
            .map(|z| z.conj() / z.norm())
            .unwrap_or(C64::new(1.0, 0.0));
        for row in 0..n {
            vectors[(row, col)] = v[row] * phase;
        }
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn check_dims(m: &CMatrix, dims: &[usize]) -> Result<()> {
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(Error::Dimension(format!(
            "matrix is {}x{} but subsystem dims {:?} multiply to {}",
            m.nrows(),
            m.ncols(),
            dims,
            total
        )));
    }
    Ok(())
}

fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

fn compose(digits: &[usize], dims: &[usize], subset: &[usize]) -> usize {
    subset.iter().fold(0, |acc, &k| acc * dims[k] + digits[k])
}

/// Reduced operator on the subsystems listed in `keep` (ascending order).
pub fn partial_trace(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    check_dims(m, dims)?;
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Dimension(format!(
            "invalid kept subsystems {keep:?} for dims {dims:?}"
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let out_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let mut out = zeros(out_dim);
    let n = m.nrows();
    let mut di = vec![0; dims.len()];
    let mut dj = vec![0; dims.len()];
    for i in 0..n {
        digits(i, dims, &mut di);
        for j in 0..n {
            digits(j, dims, &mut dj);
            if traced.iter().all(|&k| di[k] == dj[k]) {
                out[(compose(&di, dims, keep), compose(&dj, dims, keep))] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Transposes the listed subsystems, leaving the others untouched.
pub fn partial_transpose(m: &CMatrix, dims: &[usize], subsystems: &[usize]) -> Result<CMatrix> {
    check_dims(m, dims)?;
    if subsystems.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Dimension(format!(
            "cut {subsystems:?} out of range for dims {dims:?}"
        )));
    }
    let n = m.nrows();
    let all: Vec<usize> = (0..dims.len()).collect();
    let mut out = zeros(n);
    let mut di = vec![0; dims.len()];
    let mut dj = vec![0; dims.len()];
    for i in 0..n {
        digits(i, dims, &mut di);
        for j in 0..n {
            digits(j, dims, &mut dj);
            let (mut si, mut sj) = (di.clone(), dj.clone());
            for &k in subsystems {
                std::mem::swap(&mut si[k], &mut sj[k]);
            }
            out[(compose(&si, dims, &all), compose(&sj, dims, &all))] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Embeds `op` acting on subsystem `k` into the full space.
pub fn operator_on(op: &CMatrix, dims: &[usize], k: usize) -> CMatrix {
    let before: usize = dims[..k].iter().product();
    let after: usize = dims[k + 1..].iter().product();
    kron_all([&identity(before), op, &identity(after)])
}

/// Returns `I/d_k` on subsystem `k` tensored with `reduced`, where `reduced`
/// lives on every subsystem except `k`.
pub fn insert_maximally_mixed(reduced: &CMatrix, dims: &[usize], k: usize) -> CMatrix {
    let n: usize = dims.iter().product();
    let rest: Vec<usize> = (0..dims.len()).filter(|&q| q != k).collect();
    let dk = dims[k] as f64;
    let mut out = zeros(n);
    let mut di = vec![0; dims.len()];
    let mut dj = vec![0; dims.len()];
    for i in 0..n {
        digits(i, dims, &mut di);
        for j in 0..n {
            digits(j, dims, &mut dj);
            if di[k] == dj[k] {
                out[(i, j)] = reduced[(compose(&di, dims, &rest), compose(&dj, dims, &rest))] / dk;
            }
        }
    }
    out
}
