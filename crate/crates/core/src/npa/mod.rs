//! Guessing-probability relaxations in the NPA hierarchy.
//!
//! The adversary holds one measurement with an outcome per guess (one per
//! joint outcome of the target parties). Two equivalent encodings are
//! offered:
//!
//! - [`Formulation::Blocked`] (default): one moment matrix `Γᵉ ⪰ 0` per Eve
//!   outcome `e`, each indexed by words over the observed parties. `Γᵉ` is
//!   the moment matrix of the subnormalized conditional state, so
//!   `Σ_e Γᵉ` reproduces the observed moments.
//! - [`Formulation::Direct`]: a single moment matrix over the algebra with
//!   Eve as an extra commuting party.
//!
//! Both give upper bounds on the guessing probability at every level, since
//! every quantum strategy yields a feasible point. Moments are taken real:
//! `w` and `w†` share one variable.
//!
//! Linear equalities on the moments are eliminated before solving, so the
//! relaxation reaches the solver in the dual form
//! `maximize bᵀz subject to F₀ + Σ_j z_j F_j ⪰ 0`.

mod words;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::behavior::{Behavior, Scenario};
use crate::functionals::CorrelatorFunctional;
use crate::sdp::{solve_with_backend, Block, ConicProgram, Entry, SolverBackend, SolverConfig, Status};
use crate::{Error, Result};

pub use words::{canonicalize, generate_monomials, Algebra, Level, Symbol, Word};

const ELIMINATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    #[default]
    Blocked,
    Direct,
}

/// Parties whose outcomes Eve guesses, and the inputs at which she guesses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub parties: Vec<usize>,
    pub inputs: Vec<usize>,
}

impl Target {
    pub fn new(parties: Vec<usize>, inputs: Vec<usize>) -> Self {
        Self { parties, inputs }
    }

    /// Alice alone at input `x`.
    pub fn one_party(x: usize) -> Self {
        Self::new(vec![0], vec![x])
    }

    /// Alice and the first Bob at `(x, y)`.
    pub fn two_party(x: usize, y: usize) -> Self {
        Self::new(vec![0, 1], vec![x, y])
    }

    /// Alice and both Bobs at `(x, y₁, y₂)`.
    pub fn three_party(x: usize, y1: usize, y2: usize) -> Self {
        Self::new(vec![0, 1, 2], vec![x, y1, y2])
    }

    fn check(&self, scenario: &Scenario) -> Result<()> {
        if self.parties.is_empty() || self.parties.len() != self.inputs.len() {
            return Err(Error::Validation("target needs one input per party".into()));
        }
        if self.parties.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("target parties must be strictly ascending".into()));
        }
        for (&p, &x) in self.parties.iter().zip(&self.inputs) {
            if p >= scenario.num_parties() || x >= scenario.party(p).inputs {
                return Err(Error::Validation(format!(
                    "target party {p} input {x} outside scenario"
                )));
            }
        }
        Ok(())
    }

    /// Number of Eve outcomes: one per joint target outcome.
    pub fn num_guesses(&self, scenario: &Scenario) -> usize {
        self.parties.iter().map(|&p| scenario.party(p).outputs).product()
    }

    /// Joint target outcome guessed by Eve's outcome `e` (first party most
    /// significant).
    fn guess(&self, scenario: &Scenario, mut e: usize) -> Vec<usize> {
        let mut out = vec![0; self.parties.len()];
        for (k, &p) in self.parties.iter().enumerate().rev() {
            let d = scenario.party(p).outputs;
            out[k] = e % d;
            e /= d;
        }
        out
    }
}

/// Observational constraint imposed on the moments.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// Normalization only.
    None,
    /// A single Bell-functional value.
    Functional {
        functional: CorrelatorFunctional,
        value: f64,
    },
    /// The full behavior table, projected onto the no-signaling subspace
    /// first.
    Behavior(Behavior),
}

/// `Σ_w coeff·⟨w⟩ = rhs` over observed words, with `⟨w⟩` summed over Eve's
/// outcomes in the blocked formulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub terms: Vec<(Word, f64)>,
    pub rhs: f64,
}

/// Linear combination of words.
type Poly = BTreeMap<Word, f64>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (wa, ca) in a {
        for (wb, cb) in b {
            let w = wa.mul(wb);
            if !w.is_zero() {
                *out.entry(w).or_insert(0.0) += ca * cb;
            }
        }
    }
    out.retain(|_, c| *c != 0.0);
    out
}

/// Projector `P_{a|x}` of a party with `d` outcomes, written in
/// non-redundant symbols: the last outcome is `𝟙 − Σ_{a'<d−1} P_{a'|x}`.
fn projector(party: usize, input: usize, outcome: usize, outputs: usize) -> Poly {
    let mut p = Poly::new();
    if outcome + 1 < outputs {
        p.insert(Word::from_symbols(vec![Symbol::new(party, input, outcome)]), 1.0);
    } else {
        p.insert(Word::identity(), 1.0);
        for a in 0..outputs - 1 {
            p.insert(Word::from_symbols(vec![Symbol::new(party, input, a)]), -1.0);
        }
    }
    p
}

/// Joint probability of the observable product `w`, averaged over the
/// inputs of parties not in `w`.
fn marginal(behavior: &Behavior, w: &Word) -> f64 {
    let s = behavior.scenario();
    let fixed: Vec<Option<(usize, usize)>> = (0..s.num_parties())
        .map(|p| {
            w.symbols()
                .iter()
                .find(|sym| sym.party as usize == p)
                .map(|sym| (sym.input as usize, sym.outcome as usize))
        })
        .collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for x in s.input_tuples() {
        if fixed.iter().zip(&x).any(|(f, &xi)| f.is_some_and(|(fx, _)| fx != xi)) {
            continue;
        }
        count += 1;
        for a in s.outcome_tuples() {
            if fixed.iter().zip(&a).all(|(f, &ai)| f.is_none_or(|(_, fa)| fa == ai)) {
                total += behavior.prob(&x, &a);
            }
        }
    }
    total / count as f64
}

/// Correlator `⟨Π_k (2P_{0|x_k} − 𝟙)⟩` of a binary-outcome assignment.
fn correlator_poly(assignment: &[(usize, usize)]) -> Poly {
    let mut acc = Poly::from([(Word::identity(), 1.0)]);
    for &(p, x) in assignment {
        let f = Poly::from([
            (Word::from_symbols(vec![Symbol::new(p, x, 0)]), 2.0),
            (Word::identity(), -1.0),
        ]);
        acc = poly_mul(&acc, &f);
    }
    acc
}

/// Compiled relaxation together with its word-level description.
#[derive(Debug, Clone)]
pub struct NpaProblem {
    pub scenario: Scenario,
    pub level: Level,
    pub formulation: Formulation,
    pub target: Target,
    pub algebra: Algebra,
    pub monomials: Vec<Word>,
    /// Distinct moment words of one block, by variable index.
    pub moments: Vec<Word>,
    /// `index[i][j]` = moment variable of entry `(i, j)`, `None` for zero.
    pub index: Vec<Vec<Option<usize>>>,
    pub num_blocks: usize,
    pub constraints: Vec<LinearConstraint>,
    /// Objective over `(block, moment)` pairs.
    pub objective: Vec<(usize, Word, f64)>,
    /// Largest entry change from the no-signaling projection.
    pub ns_residual: f64,
    pub program: ConicProgram,
    /// Objective value at the particular solution of the equalities.
    pub objective_offset: f64,
}

/// Builds the relaxation for Eve guessing `target` under `constraint`.
pub fn assemble_sdp(
    scenario: &Scenario,
    target: &Target,
    constraint: &Constraint,
    level: &Level,
    formulation: Formulation,
) -> Result<NpaProblem> {
    target.check(scenario)?;
    let guesses = target.num_guesses(scenario);
    let observed = Algebra::from_scenario(scenario);
    let eve = scenario.num_parties();
    let algebra = match formulation {
        Formulation::Blocked => observed.clone(),
        Formulation::Direct => observed.clone().with_eve(guesses),
    };
    let monomials = generate_monomials(&algebra, level)?;
    let n = monomials.len();
    let mut keys: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    let mut moments = Vec::new();
    let mut index = vec![vec![None; n]; n];
    for i in 0..n {
        let left = monomials[i].adjoint();
        for j in i..n {
            let w = left.mul(&monomials[j]);
            if w.is_zero() {
                continue;
            }
            let next = moments.len();
            let k = *keys.entry(w.moment_key()).or_insert(next);
            if k == next {
                moments.push(w);
            }
            index[i][j] = Some(k);
            index[j][i] = Some(k);
        }
    }
    let num_blocks = match formulation {
        Formulation::Blocked => guesses,
        Formulation::Direct => 1,
    };

    let (mut constraints, ns_residual) = observed_constraints(scenario, constraint)?;
    if matches!(constraint, Constraint::Behavior(_)) {
        // Probabilities of longer products than the level reaches are not
        // moments of this relaxation.
        constraints.retain(|c| c.terms.iter().all(|(w, _)| keys.contains_key(&w.moment_key())));
    }

    // Objective: Σ_e ⟨Π_target P_{t(e)} · E_e⟩.
    let mut objective = Vec::new();
    for e in 0..guesses {
        let t = target.guess(scenario, e);
        let mut poly = Poly::from([(Word::identity(), 1.0)]);
        for ((&p, &x), &a) in target.parties.iter().zip(&target.inputs).zip(&t) {
            poly = poly_mul(&poly, &projector(p, x, a, scenario.party(p).outputs));
        }
        match formulation {
            Formulation::Blocked => objective.extend(poly.into_iter().map(|(w, c)| (e, w, c))),
            Formulation::Direct => {
                let poly = poly_mul(&poly, &projector(eve, 0, e, guesses));
                objective.extend(poly.into_iter().map(|(w, c)| (0, w, c)));
            }
        }
    }

    let lookup = |w: &Word| -> Result<usize> {
        keys.get(&w.moment_key()).copied().ok_or_else(|| {
            Error::Validation(format!(
                "moment {} is not in the level-{level} moment matrix",
                algebra.display(w)
            ))
        })
    };
    let nm = moments.len();
    let nv = nm * num_blocks;
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for c in &constraints {
        let mut row = Vec::new();
        for (w, coeff) in &c.terms {
            let k = lookup(w)?;
            row.extend((0..num_blocks).map(|b| (b * nm + k, *coeff)));
        }
        rows.push((row, c.rhs));
    }
    let mut obj = vec![0.0; nv];
    for (b, w, c) in &objective {
        obj[b * nm + lookup(w)?] += c;
    }
    let (program, objective_offset) = compile(&index, nm, num_blocks, &rows, &obj)?;
    Ok(NpaProblem {
        scenario: scenario.clone(),
        level: level.clone(),
        formulation,
        target: target.clone(),
        algebra,
        monomials,
        moments,
        index,
        num_blocks,
        constraints,
        objective,
        ns_residual,
        program,
        objective_offset,
    })
}

/// Word-level equalities implied by the constraint, plus the no-signaling
/// projection residual.
fn observed_constraints(scenario: &Scenario, constraint: &Constraint) -> Result<(Vec<LinearConstraint>, f64)> {
    let norm = LinearConstraint {
        terms: vec![(Word::identity(), 1.0)],
        rhs: 1.0,
    };
    match constraint {
        Constraint::None => Ok((vec![norm], 0.0)),
        Constraint::Functional { functional, value } => {
            if functional.scenario() != scenario {
                return Err(Error::Scenario(
                    "functional scenario differs from problem scenario".into(),
                ));
            }
            if !scenario.is_dichotomic() {
                return Err(Error::Scenario("functional constraints need binary outcomes".into()));
            }
            let w = functional.total_weight();
            if !value.is_finite() || value.abs() > w + 1e-9 {
                return Err(Error::Domain {
                    name: "functional value",
                    value: *value,
                });
            }
            let mut poly = Poly::new();
            for t in functional.terms() {
                for (word, c) in correlator_poly(&t.assignment) {
                    *poly.entry(word).or_insert(0.0) += t.weight * c;
                }
            }
            let shift = poly.remove(&Word::identity()).unwrap_or(0.0);
            poly.retain(|_, c| *c != 0.0);
            Ok((
                vec![
                    norm,
                    LinearConstraint {
                        terms: poly.into_iter().collect(),
                        rhs: value - shift,
                    },
                ],
                0.0,
            ))
        }
        Constraint::Behavior(behavior) => {
            if behavior.scenario() != scenario {
                return Err(Error::Scenario(
                    "behavior scenario differs from problem scenario".into(),
                ));
            }
            let (projected, residual) = behavior.project_no_signaling()?;
            let alg = Algebra::from_scenario(scenario);
            let mut out = vec![norm];
            let level = Level {
                length: 1,
                patterns: Vec::new(),
                all_products: true,
            };
            for w in generate_monomials(&alg, &level)? {
                if w.is_identity() {
                    continue;
                }
                out.push(LinearConstraint {
                    rhs: marginal(&projected, &w),
                    terms: vec![(w, 1.0)],
                });
            }
            Ok((out, residual))
        }
    }
}

/// Eliminates the equalities `rows` on `v = (block, moment)` variables and
/// returns the conic program in the crate's standard form together with
/// the objective offset.
fn compile(
    index: &[Vec<Option<usize>>],
    nm: usize,
    num_blocks: usize,
    rows: &[(Vec<(usize, f64)>, f64)],
    obj: &[f64],
) -> Result<(ConicProgram, f64)> {
    let nv = nm * num_blocks;
    // Reduced row echelon form, one dense row per pivot.
    let mut pivots: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    for (sparse, rhs) in rows {
        let mut row = vec![0.0; nv];
        for &(k, c) in sparse {
            row[k] += c;
        }
        let mut rhs = *rhs;
        for (pc, prow, prhs) in &pivots {
            let f = row[*pc];
            if f != 0.0 {
                row.iter_mut().zip(prow).for_each(|(r, p)| *r -= f * p);
                rhs -= f * prhs;
            }
        }
        let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale <= ELIMINATION_TOL {
            if rhs.abs() > 1e-9 {
                return Err(Error::Infeasible(format!(
                    "moment equalities are inconsistent (residual {rhs:e})"
                )));
            }
            continue;
        }
        let pc = (0..nv)
            .find(|&k| row[k].abs() >= scale * (1.0 - 1e-12))
            .expect("row has a maximal entry");
        let lead = row[pc];
        row.iter_mut().for_each(|v| *v /= lead);
        rhs /= lead;
        row.iter_mut().for_each(|v| {
            if v.abs() < ELIMINATION_TOL {
                *v = 0.0
            }
        });
        for (_, prow, prhs) in &mut pivots {
            let f = prow[pc];
            if f != 0.0 {
                prow.iter_mut().zip(&row).for_each(|(p, r)| *p -= f * r);
                *prhs -= f * rhs;
            }
        }
        pivots.push((pc, row, rhs));
    }
    let is_pivot: Vec<bool> = {
        let mut v = vec![false; nv];
        pivots.iter().for_each(|(pc, _, _)| v[*pc] = true);
        v
    };
    let free: Vec<usize> = (0..nv).filter(|&k| !is_pivot[k]).collect();

    // Matrix positions (upper triangle) of each moment.
    let n = index.len();
    let mut positions: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nm];
    for i in 0..n {
        for j in i..n {
            if let Some(k) = index[i][j] {
                positions[k].push((i, j));
            }
        }
    }
    let place = |v: usize, value: f64, out: &mut Vec<Entry>| {
        let (b, k) = (v / nm, v % nm);
        out.extend(positions[k].iter().map(|&(i, j)| Entry::new(b, i, j, value)));
    };

    let mut program = ConicProgram::new(vec![Block::psd(n); num_blocks])?;
    let mut c = Vec::new();
    let mut offset = 0.0;
    for (pc, _, rhs) in &pivots {
        if *rhs != 0.0 {
            place(*pc, *rhs, &mut c);
            offset += obj[*pc] * rhs;
        }
    }
    program.set_objective(c)?;
    // v = v₀ + N z with N[f_j, j] = 1 and N[p, j] = −R[p, f_j].
    for &f in &free {
        let mut a = Vec::new();
        place(f, -1.0, &mut a);
        let mut b = obj[f];
        for (pc, prow, _) in &pivots {
            let r = prow[f];
            if r != 0.0 {
                place(*pc, r, &mut a);
                b -= obj[*pc] * r;
            }
        }
        program.add_constraint(a, b)?;
    }
    Ok((program, offset))
}

/// Guessing-probability bound with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PguessReport {
    /// Upper bound on the guessing probability (the primal objective).
    pub bound: f64,
    /// `−log₂ bound`, clamped to be nonnegative.
    pub h_min: f64,
    pub status: Status,
    /// True only for an optimal solve; other results are not bounds.
    pub converged: bool,
    /// Lower end of the bracket (the dual objective).
    pub dual_value: f64,
    pub relative_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub ns_residual: f64,
    pub num_variables: usize,
    pub block_size: usize,
    pub num_blocks: usize,
}

impl PguessReport {
    /// The bound if the solver converged, an error otherwise.
    pub fn certified(&self) -> Result<f64> {
        if self.converged {
            Ok(self.bound)
        } else {
            Err(Error::Numerical(format!(
                "solver finished with status {:?}; no bound certified",
                self.status
            )))
        }
    }
}

/// Solves the relaxation with the given backend.
///
/// Data outside the relaxed quantum set admit no moment matrix and the
/// certificate side is unbounded. Nothing is certified then: the report
/// carries the trivial bound 1 and zero min-entropy.
pub fn pguess_bound_with(problem: &NpaProblem, config: &SolverConfig, backend: &SolverBackend) -> Result<PguessReport> {
    let sol = solve_with_backend(backend, &problem.program, config)?;
    let converged = sol.status == Status::Optimal;
    let bound = match sol.status {
        Status::Unbounded => 1.0,
        _ => problem.objective_offset + sol.primal_objective,
    };
    Ok(PguessReport {
        bound,
        h_min: crate::randomness::min_entropy_from_pguess(bound.clamp(f64::MIN_POSITIVE, 1.0))?,
        status: sol.status,
        converged,
        dual_value: problem.objective_offset + sol.dual_objective,
        relative_gap: sol.relative_gap,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        iterations: sol.iterations,
        ns_residual: problem.ns_residual,
        num_variables: problem.program.num_constraints(),
        block_size: problem.monomials.len(),
        num_blocks: problem.num_blocks,
    })
}

/// Solves the relaxation with the embedded solver.
pub fn pguess_bound(problem: &NpaProblem, config: &SolverConfig) -> Result<PguessReport> {
    pguess_bound_with(problem, config, &SolverBackend::Embedded)
}

#[cfg(test)]
mod tests;
