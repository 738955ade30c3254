//! Linear correlator functionals, the nonlocal games they define, and
//! see-saw optimization of qubit measurement settings.

mod game;
mod seesaw;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::behavior::{Behavior, Scenario};
use crate::{Error, Result};

pub use crate::behavior::MeasurementSettings;
pub use game::{functional_to_game, GameSpec};
pub use seesaw::{correlation_tensor, seesaw_optimize, seesaw_value, SeesawConfig, SeesawResult, DEFAULT_RESTARTS};

/// One signed correlator `w·⟨Π_k O^{(k)}_{x_k}⟩` over a subset of parties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    /// `(party, input)` pairs, strictly ascending in party.
    pub assignment: Vec<(usize, usize)>,
    pub weight: f64,
}

impl Term {
    pub fn new(weight: f64, assignment: &[(usize, usize)]) -> Self {
        Self {
            assignment: assignment.to_vec(),
            weight,
        }
    }

    /// Input of `party` in this term, if referenced.
    pub fn input_of(&self, party: usize) -> Option<usize> {
        self.assignment.iter().find(|&&(k, _)| k == party).map(|&(_, x)| x)
    }
}

/// Signed-weight sum of full and marginal correlators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorFunctional {
    scenario: Scenario,
    terms: Vec<Term>,
}

impl CorrelatorFunctional {
    pub fn new(scenario: Scenario, terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Validation("a functional needs at least one term".into()));
        }
        for t in &terms {
            if t.assignment.is_empty() {
                return Err(Error::Validation("term references no party".into()));
            }
            if !t.weight.is_finite() {
                return Err(Error::Validation(format!("non-finite weight {}", t.weight)));
            }
            if t.assignment.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::Validation(format!(
                    "term {:?} must list each party once, in order",
                    t.assignment
                )));
            }
            for &(k, x) in &t.assignment {
                if k >= scenario.num_parties() || x >= scenario.party(k).inputs {
                    return Err(Error::Validation(format!(
                        "term references party {k} input {x}, out of range"
                    )));
                }
            }
        }
        Ok(Self { scenario, terms })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// `W = Σ |w|`.
    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight.abs()).sum()
    }

    /// `Σ w·⟨…⟩` on `behavior`; see [`Behavior::correlator`].
    pub fn eval(&self, behavior: &Behavior) -> Result<f64> {
        if behavior.scenario() != &self.scenario {
            return Err(Error::Scenario(
                "functional and behavior belong to different scenarios".into(),
            ));
        }
        Ok(self
            .terms
            .iter()
            .map(|t| t.weight * behavior.correlator(&t.assignment))
            .sum())
    }

    /// Parses the line format written by `Display`: `weight party:input …`,
    /// with parties named as in the scenario. Blank lines and `#` comments
    /// are skipped.
    pub fn parse(scenario: &Scenario, text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let weight: f64 = fields
                .next()
                .unwrap_or_default()
                .parse()
                .map_err(|e| Error::parse(i + 1, format!("weight: {e}")))?;
            let mut assignment = Vec::new();
            for f in fields {
                let (name, input) = f
                    .split_once(':')
                    .ok_or_else(|| Error::parse(i + 1, format!("expected party:input, got `{f}`")))?;
                let k = scenario
                    .party_index(name)
                    .ok_or_else(|| Error::parse(i + 1, format!("unknown party `{name}`")))?;
                let x: usize = input
                    .parse()
                    .map_err(|e| Error::parse(i + 1, format!("input of {name}: {e}")))?;
                assignment.push((k, x));
            }
            assignment.sort_unstable();
            terms.push(Term { assignment, weight });
        }
        Self::new(scenario.clone(), terms)
    }
}

impl fmt::Display for CorrelatorFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            write!(f, "{}", t.weight)?;
            for &(k, x) in &t.assignment {
                write!(f, " {}:{}", self.scenario.party(k).name, x)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// `A₀B₀ + A₀B₁ + A₁B₀ − A₁B₁`.
pub fn chsh() -> CorrelatorFunctional {
    let terms = vec![
        Term::new(1.0, &[(0, 0), (1, 0)]),
        Term::new(1.0, &[(0, 0), (1, 1)]),
        Term::new(1.0, &[(0, 1), (1, 0)]),
        Term::new(-1.0, &[(0, 1), (1, 1)]),
    ];
    CorrelatorFunctional::new(Scenario::chsh(), terms).expect("static terms")
}

/// Chained inequality with `n` inputs per party:
/// `Σ_k ⟨A_k B_k⟩ + Σ_{k<n−1} ⟨A_{k+1} B_k⟩ − ⟨A_0 B_{n−1}⟩ ≤ 2n − 2`.
pub fn chained(n: usize) -> Result<CorrelatorFunctional> {
    if n < 2 {
        return Err(Error::Domain {
            name: "chained inputs",
            value: n as f64,
        });
    }
    let mut terms = Vec::with_capacity(2 * n);
    for k in 0..n {
        terms.push(Term::new(1.0, &[(0, k), (1, k)]));
        if k + 1 < n {
            terms.push(Term::new(1.0, &[(0, k + 1), (1, k)]));
        }
    }
    terms.push(Term::new(-1.0, &[(0, 0), (1, n - 1)]));
    CorrelatorFunctional::new(Scenario::bipartite(n, n), terms)
}

/// The broadcast functional on (Alice, Bob₁, Bob₂), local bound 4.
pub fn broadcast() -> CorrelatorFunctional {
    let tri = |w: f64, x: usize, y1: usize, y2: usize| Term::new(w, &[(0, x), (1, y1), (2, y2)]);
    let terms = vec![
        tri(1.0, 0, 0, 0),
        tri(1.0, 0, 1, 1),
        tri(1.0, 1, 1, 1),
        tri(-1.0, 1, 0, 0),
        tri(1.0, 0, 0, 1),
        tri(1.0, 0, 1, 0),
        tri(1.0, 1, 0, 1),
        tri(-1.0, 1, 1, 0),
        Term::new(-2.0, &[(0, 2), (1, 0)]),
        Term::new(2.0, &[(0, 2), (1, 1)]),
    ];
    CorrelatorFunctional::new(Scenario::broadcast(), terms).expect("static terms")
}
