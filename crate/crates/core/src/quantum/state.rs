use super::linalg;
use super::{CMatrix, C64};
use crate::{Error, Result};

/// Tolerance for Hermiticity and trace checks.
pub const ALGEBRAIC_TOL: f64 = 1e-10;
/// Tolerance for positivity (minimum eigenvalue) checks.
pub const EIGEN_TOL: f64 = 1e-8;

/// Density matrix on a finite tensor-product Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    matrix: CMatrix,
    dims: Vec<usize>,
}

impl QuantumState {
    /// Validates Hermiticity, unit trace and positivity before accepting `matrix`.
    pub fn new(matrix: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) || matrix.nrows() != total || matrix.ncols() != total {
            return Err(Error::Dimension(format!(
                "matrix {}x{} incompatible with dims {:?}",
                matrix.nrows(),
                matrix.ncols(),
                dims
            )));
        }
        let herm = linalg::hermiticity_residual(&matrix);
        if herm > ALGEBRAIC_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (residual {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > ALGEBRAIC_TOL || tr.im.abs() > ALGEBRAIC_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min_eig = linalg::min_eigenvalue(&matrix);
        if min_eig < -EIGEN_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self { matrix, dims })
    }

    /// Projector onto a (normalised on input) state vector.
    pub fn pure(amplitudes: &[C64], dims: Vec<usize>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let n = amplitudes.len();
        let m = CMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj() / (norm * norm));
        Self::new(m, dims)
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        Self {
            matrix: linalg::identity(n).scale(1.0 / n as f64),
            dims,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_subsystems(&self) -> usize {
        self.dims.len()
    }

    /// `Re Tr[op ρ]`.
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += op[(i, k)] * self.matrix[(k, i)];
            }
        }
        acc.re
    }

    pub fn tensor(&self, other: &QuantumState) -> QuantumState {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        QuantumState {
            matrix: linalg::kron(&self.matrix, &other.matrix),
            dims,
        }
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<QuantumState> {
        let m = linalg::partial_trace(&self.matrix, &self.dims, keep)?;
        Ok(QuantumState {
            matrix: m,
            dims: keep.iter().map(|&k| self.dims[k]).collect(),
        })
    }

    /// Worst violation among Hermiticity, trace and positivity.
    pub fn validity_residual(&self) -> f64 {
        let tr = self.matrix.trace();
        linalg::hermiticity_residual(&self.matrix)
            .max((tr - C64::new(1.0, 0.0)).norm())
            .max((-linalg::min_eigenvalue(&self.matrix)).max(0.0))
    }

    /// Crate-internal constructor for results of trace-preserving maps on
    /// already-valid states; skips the eigenvalue check.
    pub(crate) fn from_parts_unchecked(matrix: CMatrix, dims: Vec<usize>) -> Self {
        Self { matrix, dims }
    }
}

fn phi_plus() -> CMatrix {
    let h = 0.5;
    let mut m = linalg::zeros(4);
    for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
        m[(i, j)] = C64::new(h, 0.0);
    }
    m
}

/// `α |Φ+⟩⟨Φ+| + (1 − α) 𝟙/4` on two qubits.
pub fn isotropic_state(alpha: f64) -> Result<QuantumState> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain {
            name: "alpha",
            value: alpha,
        });
    }
    let m = phi_plus().scale(alpha) + linalg::identity(4).scale((1.0 - alpha) / 4.0);
    Ok(QuantumState::from_parts_unchecked(m, vec![2, 2]))
}

/// Local depolarizing channel on one qubit subsystem:
/// `α ρ + (1 − α) 𝟙/2 ⊗ Tr_k ρ`.
pub fn depolarize_local(state: &QuantumState, alpha: f64, subsystem: usize) -> Result<QuantumState> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain {
            name: "alpha",
            value: alpha,
        });
    }
    let dims = state.dims();
    if subsystem >= dims.len() || dims[subsystem] != 2 {
        return Err(Error::Dimension(format!(
            "subsystem {subsystem} of {dims:?} is not a qubit"
        )));
    }
    let rest: Vec<usize> = (0..dims.len()).filter(|&k| k != subsystem).collect();
    let reduced = linalg::partial_trace(state.matrix(), dims, &rest)?;
    let mixed = linalg::insert_maximally_mixed(&reduced, dims, subsystem);
    let m = state.matrix().scale(alpha) + mixed.scale(1.0 - alpha);
    Ok(QuantumState::from_parts_unchecked(m, dims.to_vec()))
}

/// Minimum eigenvalue of the partial transpose over the subsystems in `cut`.
pub fn partial_transpose_min_eig(state: &QuantumState, cut: &[usize]) -> Result<f64> {
    let n = state.num_subsystems();
    if cut.is_empty() || cut.len() >= n || cut.iter().any(|&k| k >= n) {
        return Err(Error::Dimension(format!(
            "cut {cut:?} is not a proper bipartition of {n} subsystems"
        )));
    }
    let pt = linalg::partial_transpose(state.matrix(), state.dims(), cut)?;
    Ok(linalg::hermitian_eigen(&pt).0[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_endpoints() {
        let pure = isotropic_state(1.0).unwrap();
        assert_eq!(pure.matrix(), &phi_plus());
        let mixed = isotropic_state(0.0).unwrap();
        assert_eq!(mixed, QuantumState::maximally_mixed(vec![2, 2]));
        assert!(isotropic_state(1.5).is_err());
        assert!(isotropic_state(-0.1).is_err());
    }

    #[test]
    fn isotropic_overlap_matches_closed_form() {
        let alpha = 0.637;
        let s = isotropic_state(alpha).unwrap();
        // ⟨Φ+|ρ|Φ+⟩ through the matrix trace against the closed form (3α+1)/4.
        let overlap = s.expectation(&phi_plus());
        assert!((overlap - 0.72775).abs() < 1e-12);
        assert!((overlap - (3.0 * alpha + 1.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn depolarizing_bob_half_of_phi_plus_gives_isotropic() {
        let phi = isotropic_state(1.0).unwrap();
        for &alpha in &[0.0, 0.2, 0.637, 0.9, 1.0] {
            let d = depolarize_local(&phi, alpha, 1).unwrap();
            let iso = isotropic_state(alpha).unwrap();
            assert!((d.matrix() - iso.matrix()).norm() < 1e-12, "alpha={alpha}");
        }
        let mixed = QuantumState::maximally_mixed(vec![2, 2]);
        assert!((depolarize_local(&mixed, 0.0, 0).unwrap().matrix() - mixed.matrix()).norm() < 1e-15);
        assert_eq!(depolarize_local(&phi, 1.0, 0).unwrap(), phi);
    }

    #[test]
    fn depolarize_rejects_non_qubit() {
        let s = QuantumState::maximally_mixed(vec![3, 2]);
        assert!(depolarize_local(&s, 0.5, 0).is_err());
        assert!(depolarize_local(&s, 0.5, 2).is_err());
    }

    #[test]
    fn ppt_values() {
        let pure = isotropic_state(1.0).unwrap();
        assert!((partial_transpose_min_eig(&pure, &[1]).unwrap() + 0.5).abs() < 1e-12);
        let edge = isotropic_state(1.0 / 3.0).unwrap();
        assert!(partial_transpose_min_eig(&edge, &[1]).unwrap().abs() < 1e-12);
        let product = QuantumState::pure(
            &[
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
            ],
            vec![2, 2],
        )
        .unwrap();
        assert!(partial_transpose_min_eig(&product, &[0]).unwrap() >= -1e-12);
        assert!(partial_transpose_min_eig(&pure, &[0, 1]).is_err());
        assert!(partial_transpose_min_eig(&pure, &[]).is_err());
    }

    #[test]
    fn constructor_rejects_invalid_matrices() {
        let mut m = linalg::identity(2).scale(0.5);
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(QuantumState::new(m, vec![2]).is_err());
        assert!(QuantumState::new(linalg::identity(2), vec![2]).is_err());
        let neg = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.5, 0.0),
            C64::new(-0.5, 0.0),
        ]));
        assert!(QuantumState::new(neg, vec![2]).is_err());
        assert!(QuantumState::new(linalg::identity(4).scale(0.25), vec![2, 3]).is_err());
    }
}
