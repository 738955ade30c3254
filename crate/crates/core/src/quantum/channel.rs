use super::state::{QuantumState, ALGEBRAIC_TOL};
use super::{linalg, CMatrix, C64};
use crate::{Error, Result};

/// Isometry splitting a qubit into two qubits, optionally preceded by a
/// single-qubit unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryChannel {
    isometry: CMatrix,
    pre_rotation: Option<CMatrix>,
}

impl IsometryChannel {
    /// `|0⟩ → |00⟩`, `|1⟩ → |11⟩`.
    pub fn copy() -> Self {
        let mut v = CMatrix::from_element(4, 2, C64::new(0.0, 0.0));
        v[(0, 0)] = C64::new(1.0, 0.0);
        v[(3, 1)] = C64::new(1.0, 0.0);
        Self {
            isometry: v,
            pre_rotation: None,
        }
    }

    /// Any `d² × d` matrix with `V†V = 𝟙`.
    pub fn new(isometry: CMatrix) -> Result<Self> {
        let d = isometry.ncols();
        if isometry.nrows() != d * d {
            return Err(Error::Dimension(format!(
                "isometry must be {}x{}, got {}x{}",
                d * d,
                d,
                isometry.nrows(),
                d
            )));
        }
        let residual = (isometry.adjoint() * &isometry - linalg::identity(d)).norm();
        if residual > ALGEBRAIC_TOL {
            return Err(Error::Numerical(format!("V†V deviates from identity by {residual:e}")));
        }
        Ok(Self {
            isometry,
            pre_rotation: None,
        })
    }

    pub fn with_pre_rotation(mut self, unitary: CMatrix) -> Result<Self> {
        let d = self.input_dim();
        if unitary.nrows() != d || unitary.ncols() != d {
            return Err(Error::Dimension(format!("pre-rotation must be {d}x{d}")));
        }
        let residual = (unitary.adjoint() * &unitary - linalg::identity(d)).norm();
        if residual > ALGEBRAIC_TOL {
            return Err(Error::Numerical(format!(
                "pre-rotation is not unitary (residual {residual:e})"
            )));
        }
        self.pre_rotation = Some(unitary);
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.isometry.ncols()
    }

    /// The full map `V U` applied to the broadcast subsystem.
    pub fn effective_isometry(&self) -> CMatrix {
        match &self.pre_rotation {
            Some(u) => &self.isometry * u,
            None => self.isometry.clone(),
        }
    }
}

/// Applies the channel to `subsystem`, which splits into two adjacent
/// subsystems of the same dimension in the output.
pub fn broadcast_apply(state: &QuantumState, channel: &IsometryChannel, subsystem: usize) -> Result<QuantumState> {
    let dims = state.dims();
    if subsystem >= dims.len() {
        return Err(Error::Dimension(format!(
            "subsystem {subsystem} out of range for {dims:?}"
        )));
    }
    let d = channel.input_dim();
    if dims[subsystem] != d {
        return Err(Error::Dimension(format!(
            "channel input dimension {d} != subsystem dimension {}",
            dims[subsystem]
        )));
    }
    let before: usize = dims[..subsystem].iter().product();
    let after: usize = dims[subsystem + 1..].iter().product();
    let v = linalg::kron_all([
        &linalg::identity(before),
        &channel.effective_isometry(),
        &linalg::identity(after),
    ]);
    let m = &v * state.matrix() * v.adjoint();
    let mut out_dims = dims[..subsystem].to_vec();
    out_dims.extend([d, d]);
    out_dims.extend_from_slice(&dims[subsystem + 1..]);
    Ok(QuantumState::from_parts_unchecked(m, out_dims))
}
