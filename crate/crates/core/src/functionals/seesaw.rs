//! See-saw maximization of a correlator functional over projective qubit
//! measurements.
//!
//! The state is held as its Pauli correlation tensor
//! `T_{i₁…iₙ} = Tr[ρ σ_{i₁} ⊗ … ⊗ σ_{iₙ}]` (σ₀ = 𝟙), so every correlator is a
//! contraction of `T` with one 4-vector per party: `e₀` for an unreferenced
//! party and `(0, n)` for the observable `n·σ`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{CorrelatorFunctional, MeasurementSettings};
use crate::quantum::{linalg, pauli_x, pauli_y, pauli_z, DichotomicObservable, QuantumState};
use crate::{Error, Result};

/// Random restarts used when none are requested explicitly.
pub const DEFAULT_RESTARTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeesawConfig {
    pub restarts: usize,
    /// Stop once a full sweep improves the value by less than this.
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for SeesawConfig {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            tol: 1e-10,
            max_sweeps: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeesawResult {
    pub settings: MeasurementSettings,
    /// Functional value attained by `settings` on the state.
    pub value: f64,
    /// False when the best restart hit `max_sweeps` before converging.
    pub converged: bool,
    pub restart: usize,
    pub sweeps: usize,
}

/// Pauli correlation tensor of an `n`-qubit state, first qubit most
/// significant in the base-4 index.
pub fn correlation_tensor(state: &QuantumState) -> Result<Vec<f64>> {
    if state.dims().iter().any(|&d| d != 2) {
        return Err(Error::Dimension(format!(
            "correlation tensor needs qubits, got dims {:?}",
            state.dims()
        )));
    }
    let n = state.num_subsystems();
    let paulis = [linalg::identity(2), pauli_x(), pauli_y(), pauli_z()];
    let mut t = vec![0.0; 1 << (2 * n)];
    for (idx, v) in t.iter_mut().enumerate() {
        let ops: Vec<_> = (0..n).map(|k| &paulis[(idx >> (2 * (n - 1 - k))) & 3]).collect();
        *v = state.expectation(&linalg::kron_all(ops));
    }
    Ok(t)
}

struct Problem<'a> {
    tensor: Vec<f64>,
    n: usize,
    f: &'a CorrelatorFunctional,
}

impl Problem<'_> {
    fn vectors(&self, bloch: &[Vec<[f64; 3]>], term: usize) -> Vec<[f64; 4]> {
        let t = &self.f.terms()[term];
        (0..self.n)
            .map(|k| match t.input_of(k) {
                Some(x) => {
                    let b = bloch[k][x];
                    [0.0, b[0], b[1], b[2]]
                }
                None => [1.0, 0.0, 0.0, 0.0],
            })
            .collect()
    }

    /// Contracts the tensor with every party's vector except `free`, whose
    /// index is left open.
    fn contract(&self, vecs: &[[f64; 4]], free: Option<usize>) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (idx, &t) in self.tensor.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let mut prod = t;
            let mut open = 0;
            for (k, v) in vecs.iter().enumerate() {
                let i = (idx >> (2 * (self.n - 1 - k))) & 3;
                if Some(k) == free {
                    open = i;
                } else {
                    prod *= v[i];
                    if prod == 0.0 {
                        break;
                    }
                }
            }
            out[open] += prod;
        }
        out
    }

    fn value(&self, bloch: &[Vec<[f64; 3]>]) -> f64 {
        (0..self.f.terms().len())
            .map(|ti| self.f.terms()[ti].weight * self.contract(&self.vectors(bloch, ti), None)[0])
            .sum()
    }

    /// Best response of `party`: each input's Bloch vector is aligned with
    /// its conditional correlation vector; a vanishing vector keeps the
    /// previous choice.
    fn update(&self, bloch: &mut [Vec<[f64; 3]>], party: usize) {
        let inputs = bloch[party].len();
        let mut k = vec![[0.0; 3]; inputs];
        for (ti, t) in self.f.terms().iter().enumerate() {
            if let Some(x) = t.input_of(party) {
                let c = self.contract(&self.vectors(bloch, ti), Some(party));
                for j in 0..3 {
                    k[x][j] += t.weight * c[j + 1];
                }
            }
        }
        for (x, kx) in k.iter().enumerate() {
            let norm = (kx[0] * kx[0] + kx[1] * kx[1] + kx[2] * kx[2]).sqrt();
            if norm > 1e-14 {
                bloch[party][x] = [kx[0] / norm, kx[1] / norm, kx[2] / norm];
            }
        }
    }
}

/// Value of `f` for the given settings, using the correlation tensor.
pub fn seesaw_value(state: &QuantumState, f: &CorrelatorFunctional, settings: &MeasurementSettings) -> Result<f64> {
    settings.check(f.scenario())?;
    let problem = Problem {
        tensor: correlation_tensor(state)?,
        n: state.num_subsystems(),
        f,
    };
    let bloch: Vec<Vec<[f64; 3]>> = settings
        .parties
        .iter()
        .map(|obs| obs.iter().map(|o| o.bloch()).collect())
        .collect();
    Ok(problem.value(&bloch))
}

/// Alternating best-response maximization of `f` over projective qubit
/// measurements, best of `config.restarts` random starts.
///
/// Restart `r` draws its initial settings from ChaCha stream `r` under
/// `config.seed`. The returned value is attained by the returned settings,
/// hence a lower bound on the quantum maximum for this state.
pub fn seesaw_optimize(state: &QuantumState, f: &CorrelatorFunctional, config: &SeesawConfig) -> Result<SeesawResult> {
    let scenario = f.scenario();
    if !scenario.is_dichotomic() {
        return Err(Error::Scenario("see-saw needs dichotomic outcomes".into()));
    }
    if state.num_subsystems() != scenario.num_parties() {
        return Err(Error::Dimension(format!(
            "state has {} subsystems, scenario has {} parties",
            state.num_subsystems(),
            scenario.num_parties()
        )));
    }
    if config.restarts == 0 {
        return Err(Error::Domain {
            name: "restarts",
            value: 0.0,
        });
    }
    let problem = Problem {
        tensor: correlation_tensor(state)?,
        n: state.num_subsystems(),
        f,
    };
    let mut best: Option<(f64, Vec<Vec<[f64; 3]>>, bool, usize, usize)> = None;
    for restart in 0..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(restart as u64);
        let mut bloch: Vec<Vec<[f64; 3]>> = scenario
            .parties()
            .iter()
            .map(|p| {
                (0..p.inputs)
                    .map(|_| DichotomicObservable::random(&mut rng).bloch())
                    .collect()
            })
            .collect();
        let mut value = problem.value(&bloch);
        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < config.max_sweeps {
            sweeps += 1;
            for party in 0..problem.n {
                problem.update(&mut bloch, party);
            }
            let next = problem.value(&bloch);
            debug_assert!(
                next >= value - 1e-9 * (1.0 + value.abs()),
                "see-saw decreased: {value} -> {next}"
            );
            let gain = next - value;
            value = next;
            if gain < config.tol {
                converged = true;
                break;
            }
        }
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, bloch, converged, restart, sweeps));
        }
    }
    let (value, bloch, converged, restart, sweeps) = best.expect("at least one restart");
    let settings = MeasurementSettings::new(
        bloch
            .into_iter()
            .map(|obs| {
                obs.into_iter()
                    .map(|b| DichotomicObservable::from_vector(b).expect("unit vector"))
                    .collect()
            })
            .collect(),
    );
    Ok(SeesawResult {
        settings,
        value,
        converged,
        restart,
        sweeps,
    })
}
