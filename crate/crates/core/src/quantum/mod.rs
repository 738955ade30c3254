//! Dense complex linear algebra for small multi-qubit systems.
//!
//! Operators are written in the computational basis with `|0⟩ ≡ H` and
//! `|1⟩ ≡ V`.

mod channel;
pub mod linalg;
mod observable;
mod state;

pub use channel::{broadcast_apply, IsometryChannel};
pub use observable::{observable_from_bloch, pauli_x, pauli_y, pauli_z, DichotomicObservable};
pub use state::{depolarize_local, isotropic_state, partial_transpose_min_eig, QuantumState, ALGEBRAIC_TOL, EIGEN_TOL};

pub type C64 = nalgebra::Complex<f64>;
pub type CMatrix = nalgebra::DMatrix<C64>;
