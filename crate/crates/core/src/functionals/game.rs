use rand::Rng;
use serde::Serialize;

use super::CorrelatorFunctional;
use crate::behavior::{Behavior, Scenario};
use crate::{Error, Result};

/// One joint input tuple of the game.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct Question {
    inputs: Vec<usize>,
    probability: f64,
    /// Parties whose outcomes enter the win predicate.
    parties: Vec<usize>,
    /// Required parity: `true` when the product of ±1 outcomes must be +1.
    positive: bool,
}

/// Nonlocal game equivalent to a correlator functional.
///
/// Each term with weight `w` is asked with total probability `|w|/W`,
/// spread uniformly over the inputs of parties the term does not reference.
/// The game is won when the product of the referenced ±1 outcomes has the
/// sign of `w`, so that `ω = (I + W) / (2W)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameSpec {
    scenario: Scenario,
    questions: Vec<Question>,
    cumulative: Vec<f64>,
    scale: f64,
}

/// Builds the game of a functional with dichotomic outcomes.
///
/// Fails for a functional of zero total weight, or when two terms would ask
/// the same joint input tuple.
pub fn functional_to_game(f: &CorrelatorFunctional) -> Result<GameSpec> {
    let s = f.scenario();
    if !s.is_dichotomic() {
        return Err(Error::Scenario("games need dichotomic outcomes".into()));
    }
    let w = f.total_weight();
    if !(w > 0.0) {
        return Err(Error::Validation("functional has zero total weight".into()));
    }
    let mut owner: Vec<Option<usize>> = vec![None; s.num_input_tuples()];
    let mut questions = Vec::new();
    for (ti, t) in f.terms().iter().enumerate() {
        if t.weight == 0.0 {
            continue;
        }
        let matching: Vec<Vec<usize>> = s
            .input_tuples()
            .filter(|x| t.assignment.iter().all(|&(k, xk)| x[k] == xk))
            .collect();
        let share = t.weight.abs() / w / matching.len() as f64;
        for x in matching {
            let slot = &mut owner[s.input_index(&x)];
            if let Some(prev) = slot.replace(ti) {
                return Err(Error::Validation(format!(
                    "terms {prev} and {ti} both ask inputs {x:?}"
                )));
            }
            questions.push(Question {
                inputs: x,
                probability: share,
                parties: t.assignment.iter().map(|&(k, _)| k).collect(),
                positive: t.weight > 0.0,
            });
        }
    }
    questions.sort_by_key(|a| s.input_index(&a.inputs));
    let mut acc = 0.0;
    let cumulative = questions
        .iter()
        .map(|q| {
            acc += q.probability;
            acc
        })
        .collect();
    Ok(GameSpec {
        scenario: s.clone(),
        questions,
        cumulative,
        scale: w,
    })
}

impl GameSpec {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// `W`, the total absolute weight of the functional.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Probability that `inputs` is asked.
    pub fn probability(&self, inputs: &[usize]) -> f64 {
        self.find(inputs).map_or(0.0, |q| q.probability)
    }

    /// Joint input tuples with nonzero probability, in storage order.
    pub fn support(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.questions.iter().map(|q| (q.inputs.as_slice(), q.probability))
    }

    fn find(&self, inputs: &[usize]) -> Option<&Question> {
        self.questions.iter().find(|q| q.inputs == inputs)
    }

    /// Win predicate; `false` for inputs outside the support.
    pub fn wins(&self, inputs: &[usize], outcomes: &[usize]) -> bool {
        self.find(inputs).is_some_and(|q| {
            let odd = q.parties.iter().filter(|&&k| outcomes[k] != 0).count() % 2 == 1;
            odd != q.positive
        })
    }

    /// Winning probability of `behavior`, computed from the table directly.
    pub fn score(&self, behavior: &Behavior) -> Result<f64> {
        if behavior.scenario() != &self.scenario {
            return Err(Error::Scenario("game and behavior scenarios differ".into()));
        }
        let mut omega = 0.0;
        for q in &self.questions {
            let row = behavior.row(&q.inputs);
            for (j, a) in self.scenario.outcome_tuples().enumerate() {
                if self.wins(&q.inputs, &a) {
                    omega += q.probability * row[j];
                }
            }
        }
        Ok(omega)
    }

    pub fn omega_from_value(&self, value: f64) -> f64 {
        (value + self.scale) / (2.0 * self.scale)
    }

    pub fn value_from_omega(&self, omega: f64) -> f64 {
        (2.0 * omega - 1.0) * self.scale
    }

    /// Draws a joint input tuple from the game distribution.
    pub fn sample_inputs<R: Rng + ?Sized>(&self, rng: &mut R) -> &[usize] {
        let total = *self.cumulative.last().expect("nonempty game");
        let u: f64 = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        &self.questions[i.min(self.questions.len() - 1)].inputs
    }
}
