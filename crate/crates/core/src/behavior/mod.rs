//! Multiparty conditional probability tables `p(outcomes | inputs)`.
//!
//! Tables are flattened with inputs outer and outcomes inner (see
//! [`Scenario`]). Outcome index 0 corresponds to the `+1` eigenvalue of a
//! dichotomic observable.

mod counts;
mod csvio;
mod scenario;

use serde::{Deserialize, Serialize};

use crate::quantum::{linalg, CMatrix, DichotomicObservable, QuantumState};
use crate::{Error, Result};

pub use counts::{behavior_from_counts, CountsTable, DEFAULT_RESAMPLES};
pub use csvio::{read_behavior_csv, read_counts_csv, write_behavior_csv, write_counts_csv};
pub use scenario::{Party, Scenario};

/// Default tolerance for accepting experimental (finite-statistics) data as
/// no-signaling.
pub const DEFAULT_NS_TOL: f64 = 5e-3;

/// One list of observables per party, indexed by input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSettings {
    pub parties: Vec<Vec<DichotomicObservable>>,
}

impl MeasurementSettings {
    pub fn new(parties: Vec<Vec<DichotomicObservable>>) -> Self {
        Self { parties }
    }

    pub fn check(&self, scenario: &Scenario) -> Result<()> {
        if self.parties.len() != scenario.num_parties() {
            return Err(Error::Dimension(format!(
                "settings for {} parties, scenario has {}",
                self.parties.len(),
                scenario.num_parties()
            )));
        }
        for (k, (obs, party)) in self.parties.iter().zip(scenario.parties()).enumerate() {
            if obs.len() != party.inputs {
                return Err(Error::Dimension(format!(
                    "party {k} has {} observables for {} inputs",
                    obs.len(),
                    party.inputs
                )));
            }
            if party.outputs != 2 {
                return Err(Error::Scenario(format!("party {} is not dichotomic", party.name)));
            }
        }
        Ok(())
    }
}

/// Report produced by [`Behavior::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Largest `|Σ_a p(a|x) − 1|` over input tuples.
    pub normalization: f64,
    /// Magnitude of the most negative entry (0 if none).
    pub negativity: f64,
    /// Largest change of any marginal under a change of the remote inputs.
    pub no_signaling: f64,
    pub tol: f64,
}

impl ValidationReport {
    pub fn worst(&self) -> f64 {
        self.normalization.max(self.negativity).max(self.no_signaling)
    }

    pub fn passed(&self) -> bool {
        self.worst() <= self.tol
    }
}

/// Conditional probability table for a fixed scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    scenario: Scenario,
    table: Vec<f64>,
}

impl Behavior {
    /// Wraps a raw table without validating it; see [`Behavior::validate`].
    pub fn new(scenario: Scenario, table: Vec<f64>) -> Result<Self> {
        if table.len() != scenario.table_len() {
            return Err(Error::Dimension(format!(
                "table has {} entries, scenario needs {}",
                table.len(),
                scenario.table_len()
            )));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("table contains non-finite entries".into()));
        }
        Ok(Self { scenario, table })
    }

    pub fn from_fn<F: FnMut(&[usize], &[usize]) -> f64>(scenario: Scenario, mut f: F) -> Self {
        let table = (0..scenario.table_len())
            .map(|cell| {
                let (x, a) = scenario.decode(cell);
                f(&x, &a)
            })
            .collect();
        Self { scenario, table }
    }

    pub fn uniform(scenario: Scenario) -> Self {
        let p = 1.0 / scenario.num_outcome_tuples() as f64;
        Self {
            table: vec![p; scenario.table_len()],
            scenario,
        }
    }

    /// Local deterministic behavior: party `k` answers `strategy[k][x_k]`.
    pub fn deterministic(scenario: Scenario, strategy: &[Vec<usize>]) -> Result<Self> {
        if strategy.len() != scenario.num_parties()
            || strategy
                .iter()
                .zip(scenario.parties())
                .any(|(s, p)| s.len() != p.inputs || s.iter().any(|&a| a >= p.outputs))
        {
            return Err(Error::Dimension("strategy does not match scenario".into()));
        }
        Ok(Self::from_fn(scenario, |x, a| {
            let hit = (0..x.len()).all(|k| strategy[k][x[k]] == a[k]);
            if hit {
                1.0
            } else {
                0.0
            }
        }))
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn into_table(self) -> Vec<f64> {
        self.table
    }

    pub fn prob(&self, inputs: &[usize], outcomes: &[usize]) -> f64 {
        self.table[self.scenario.index(inputs, outcomes)]
    }

    /// Conditional distribution over outcome tuples for one input tuple.
    pub fn row(&self, inputs: &[usize]) -> &[f64] {
        let n = self.scenario.num_outcome_tuples();
        let start = self.scenario.input_index(inputs) * n;
        &self.table[start..start + n]
    }

    /// `λ·self + (1 − λ)·other`.
    pub fn mix(&self, other: &Behavior, lambda: f64) -> Result<Behavior> {
        if self.scenario != other.scenario {
            return Err(Error::Scenario("cannot mix behaviors of different scenarios".into()));
        }
        Ok(Behavior {
            scenario: self.scenario.clone(),
            table: self
                .table
                .iter()
                .zip(&other.table)
                .map(|(p, q)| lambda * p + (1.0 - lambda) * q)
                .collect(),
        })
    }

    /// Convex combination `Σ w_i b_i`; weights are used as given.
    pub fn combine(parts: &[(f64, &Behavior)]) -> Result<Behavior> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Validation("empty combination".into()))?
            .1;
        let mut table = vec![0.0; first.table.len()];
        for (w, b) in parts {
            if b.scenario != first.scenario {
                return Err(Error::Scenario("mixed scenarios in combination".into()));
            }
            for (t, p) in table.iter_mut().zip(&b.table) {
                *t += w * p;
            }
        }
        Ok(Behavior {
            scenario: first.scenario.clone(),
            table,
        })
    }

    /// Relabels outcomes `0 ↔ 1` of `party` at `input`.
    pub fn flip_outcome(&self, party: usize, input: usize) -> Behavior {
        let s = &self.scenario;
        Behavior::from_fn(s.clone(), |x, a| {
            if x[party] == input && s.party(party).outputs == 2 {
                let mut b = a.to_vec();
                b[party] ^= 1;
                self.prob(x, &b)
            } else {
                self.prob(x, a)
            }
        })
    }

    /// Expectation of `Π_{k} (−1)^{a_k}` over the parties in `assignment`
    /// (pairs `(party, input)`), treating outcome 0 as `+1` and any other
    /// outcome as `−1`.
    ///
    /// Unreferenced parties are summed out and their inputs averaged, which
    /// for no-signaling behaviors is the same as fixing any slice.
    pub fn correlator(&self, assignment: &[(usize, usize)]) -> f64 {
        let s = &self.scenario;
        let mut acc = 0.0;
        let mut slices = 0usize;
        for (i, x) in s.input_tuples().enumerate() {
            if !assignment.iter().all(|&(k, xk)| x[k] == xk) {
                continue;
            }
            slices += 1;
            let n = s.num_outcome_tuples();
            for (j, a) in s.outcome_tuples().enumerate() {
                let sign = assignment
                    .iter()
                    .fold(1.0, |acc, &(k, _)| if a[k] == 0 { acc } else { -acc });
                acc += sign * self.table[i * n + j];
            }
        }
        if slices == 0 {
            0.0
        } else {
            acc / slices as f64
        }
    }

    /// Marginal `p(a_S | x_S, x_rest)` of the parties in `keep`, as a table
    /// over the full input tuple (used for no-signaling checks).
    fn marginal_slices(&self, keep: &[usize]) -> Vec<Vec<f64>> {
        let s = &self.scenario;
        let kept = s.restrict(keep).expect("valid subset");
        let target: Vec<usize> = s
            .outcome_tuples()
            .map(|a| {
                let kept_a: Vec<usize> = keep.iter().map(|&k| a[k]).collect();
                kept.outcome_index(&kept_a)
            })
            .collect();
        let n = s.num_outcome_tuples();
        (0..s.num_input_tuples())
            .map(|i| {
                let mut row = vec![0.0; kept.num_outcome_tuples()];
                for (j, &t) in target.iter().enumerate() {
                    row[t] += self.table[i * n + j];
                }
                row
            })
            .collect()
    }

    /// Largest spread of the `keep`-marginal across the remote inputs.
    fn signaling_residual(&self, keep: &[usize]) -> f64 {
        let s = &self.scenario;
        let slices = self.marginal_slices(keep);
        let kept = s.restrict(keep).expect("valid subset");
        let mut lo = vec![f64::INFINITY; kept.table_len()];
        let mut hi = vec![f64::NEG_INFINITY; kept.table_len()];
        for (i, x) in s.input_tuples().enumerate() {
            let xs: Vec<usize> = keep.iter().map(|&k| x[k]).collect();
            let base = kept.input_index(&xs) * kept.num_outcome_tuples();
            for (j, &v) in slices[i].iter().enumerate() {
                lo[base + j] = lo[base + j].min(v);
                hi[base + j] = hi[base + j].max(v);
            }
        }
        lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max)
    }

    /// Normalization, negativity and no-signaling residuals over every
    /// proper marginal.
    pub fn validate(&self, tol: f64) -> ValidationReport {
        let s = &self.scenario;
        let normalization = s
            .input_tuples()
            .map(|x| (self.row(&x).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        let negativity = self.table.iter().fold(0.0f64, |m, &v| m.max(-v));
        let n = s.num_parties();
        let mut no_signaling = 0.0f64;
        for mask in 1..(1usize << n) - 1 {
            let keep: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
            no_signaling = no_signaling.max(self.signaling_residual(&keep));
        }
        ValidationReport {
            normalization,
            negativity,
            no_signaling,
            tol,
        }
    }

    /// Behavior of the parties in `keep` (strictly ascending).
    ///
    /// Dropped parties' outcomes are summed and their inputs averaged. Fails
    /// if the marginal depends on the dropped inputs by more than `tol`.
    pub fn marginalize(&self, keep: &[usize], tol: f64) -> Result<Behavior> {
        let s = &self.scenario;
        let kept = s.restrict(keep)?;
        if keep.len() == s.num_parties() {
            return Ok(self.clone());
        }
        let residual = self.signaling_residual(keep);
        if residual > tol {
            return Err(Error::Validation(format!(
                "marginal on parties {keep:?} depends on remote inputs (residual {residual:e})"
            )));
        }
        let slices = self.marginal_slices(keep);
        let mut table = vec![0.0; kept.table_len()];
        let mut hits = vec![0usize; kept.num_input_tuples()];
        for (i, x) in s.input_tuples().enumerate() {
            let xs: Vec<usize> = keep.iter().map(|&k| x[k]).collect();
            let xi = kept.input_index(&xs);
            hits[xi] += 1;
            let base = xi * kept.num_outcome_tuples();
            for (j, &v) in slices[i].iter().enumerate() {
                table[base + j] += v;
            }
        }
        let n = kept.num_outcome_tuples();
        for (xi, &h) in hits.iter().enumerate() {
            for v in &mut table[xi * n..(xi + 1) * n] {
                *v /= h as f64;
            }
        }
        Ok(Behavior { scenario: kept, table })
    }

    /// Euclidean projection onto the normalized no-signaling affine subspace.
    ///
    /// For binary outcomes the subspace is spanned by mutually orthogonal
    /// correlator directions, so the projection keeps every correlator
    /// `⟨Π_{k∈S} A_{x_k}⟩` averaged over the inputs outside `S`. Returns the
    /// projected behavior and the largest entrywise change.
    pub fn project_no_signaling(&self) -> Result<(Behavior, f64)> {
        let s = &self.scenario;
        if !s.is_dichotomic() {
            return Err(Error::Scenario(
                "no-signaling projection requires binary outcomes".into(),
            ));
        }
        let n = s.num_parties();
        let mut corr: Vec<Vec<f64>> = Vec::with_capacity(1 << n);
        for mask in 0..(1usize << n) {
            let subset: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
            let sub_inputs: usize = subset.iter().map(|&k| s.party(k).inputs).product();
            let mut values = vec![0.0; sub_inputs];
            for (idx, v) in values.iter_mut().enumerate() {
                let mut rem = idx;
                let mut assign = vec![(0, 0); subset.len()];
                for (pos, &k) in subset.iter().enumerate().rev() {
                    let m = s.party(k).inputs;
                    assign[pos] = (k, rem % m);
                    rem /= m;
                }
                *v = if mask == 0 { 1.0 } else { self.correlator(&assign) };
            }
            corr.push(values);
        }
        let scale = 1.0 / (1usize << n) as f64;
        let projected = Behavior::from_fn(s.clone(), |x, a| {
            let mut total = 0.0;
            for (mask, values) in corr.iter().enumerate() {
                let mut idx = 0;
                let mut sign = 1.0;
                for k in 0..n {
                    if mask >> k & 1 == 1 {
                        idx = idx * s.party(k).inputs + x[k];
                        if a[k] != 0 {
                            sign = -sign;
                        }
                    }
                }
                total += sign * values[idx];
            }
            total * scale
        });
        let change = projected
            .table
            .iter()
            .zip(&self.table)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        Ok((projected, change))
    }
}

/// Born-rule behavior `Tr[(Π_{a₁|x₁} ⊗ … ⊗ Π_{aₙ|xₙ}) ρ]`.
pub fn born_behavior(scenario: &Scenario, state: &QuantumState, settings: &MeasurementSettings) -> Result<Behavior> {
    settings.check(scenario)?;
    if state.dims().len() != scenario.num_parties() || state.dims().iter().any(|&d| d != 2) {
        return Err(Error::Dimension(format!(
            "state dims {:?} do not match a {}-qubit scenario",
            state.dims(),
            scenario.num_parties()
        )));
    }
    let projectors: Vec<Vec<[CMatrix; 2]>> = settings
        .parties
        .iter()
        .map(|obs| obs.iter().map(|o| [o.projector(0), o.projector(1)]).collect())
        .collect();
    let mut table = Vec::with_capacity(scenario.table_len());
    for x in scenario.input_tuples() {
        for a in scenario.outcome_tuples() {
            let ops: Vec<&CMatrix> = (0..x.len()).map(|k| &projectors[k][x[k]][a[k]]).collect();
            let op = linalg::kron_all(ops);
            table.push(state.expectation(&op));
        }
    }
    Behavior::new(scenario.clone(), table)
}
