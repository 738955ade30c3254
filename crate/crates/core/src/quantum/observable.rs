use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{linalg, CMatrix, C64};
use crate::{Error, Result};

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ],
    )
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(0.0, -1.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, 0.0),
        ],
    )
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(-1.0, 0.0),
        ],
    )
}

/// A ±1-valued projective qubit measurement `n·σ` with `|n| = 1`.
///
/// Outcome index 0 is the +1 eigenvalue, index 1 the −1 eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct DichotomicObservable {
    bloch: [f64; 3],
}

impl DichotomicObservable {
    /// Normalises `v`; the zero vector is rejected.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(norm > 1e-14) || !norm.is_finite() {
            return Err(Error::Domain {
                name: "bloch vector norm",
                value: norm,
            });
        }
        Ok(Self {
            bloch: [v[0] / norm, v[1] / norm, v[2] / norm],
        })
    }

    /// `sin θ cos φ X + sin θ sin φ Y + cos θ Z`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self {
            bloch: [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()],
        }
    }

    /// Uniformly distributed direction on the Bloch sphere.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let r = (1.0 - z * z).max(0.0).sqrt();
        Self {
            bloch: [r * phi.cos(), r * phi.sin(), z],
        }
    }

    pub fn bloch(&self) -> [f64; 3] {
        self.bloch
    }

    /// Polar and azimuthal angles `(θ, φ)`.
    pub fn angles(&self) -> (f64, f64) {
        let [x, y, z] = self.bloch;
        (z.clamp(-1.0, 1.0).acos(), y.atan2(x))
    }

    pub fn matrix(&self) -> CMatrix {
        let [x, y, z] = self.bloch;
        pauli_x().scale(x) + pauli_y().scale(y) + pauli_z().scale(z)
    }

    /// Projector for outcome 0 (+1) or 1 (−1).
    pub fn projector(&self, outcome: usize) -> CMatrix {
        let sign = if outcome == 0 { 0.5 } else { -0.5 };
        linalg::identity(2).scale(0.5) + self.matrix().scale(sign)
    }
}

impl TryFrom<[f64; 3]> for DichotomicObservable {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        Self::from_vector(v)
    }
}

impl From<DichotomicObservable> for [f64; 3] {
    fn from(o: DichotomicObservable) -> Self {
        o.bloch
    }
}

/// Measurement observable from polar angle `theta` and azimuth `phi`.
pub fn observable_from_bloch(theta: f64, phi: f64) -> DichotomicObservable {
    DichotomicObservable::from_angles(theta, phi)
}
