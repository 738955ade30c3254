use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One measuring party: its display name, CSV column labels and alphabet sizes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Party {
    pub name: String,
    pub input_label: String,
    pub output_label: String,
    pub inputs: usize,
    pub outputs: usize,
}

impl Party {
    pub fn new(name: &str, input_label: &str, output_label: &str, inputs: usize, outputs: usize) -> Self {
        Self {
            name: name.to_string(),
            input_label: input_label.to_string(),
            output_label: output_label.to_string(),
            inputs,
            outputs,
        }
    }
}

/// Ordered list of parties.
///
/// Flattening convention for every table indexed by a scenario: the joint
/// input tuple is the outer index and the joint outcome tuple the inner one;
/// each tuple is read as a mixed-radix number with the first party most
/// significant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    parties: Vec<Party>,
}

impl Scenario {
    pub fn new(parties: Vec<Party>) -> Result<Self> {
        if parties.is_empty() {
            return Err(Error::Scenario("a scenario needs at least one party".into()));
        }
        for p in &parties {
            if p.inputs == 0 || p.outputs == 0 {
                return Err(Error::Scenario(format!(
                    "party {} has {} inputs and {} outputs",
                    p.name, p.inputs, p.outputs
                )));
            }
        }
        let mut labels: Vec<&str> = parties
            .iter()
            .flat_map(|p| [p.input_label.as_str(), p.output_label.as_str()])
            .collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Scenario("column labels must be distinct".into()));
        }
        Ok(Self { parties })
    }

    /// Alice with three inputs, Bob₁ and Bob₂ with two; all outcomes binary.
    pub fn broadcast() -> Self {
        Self {
            parties: vec![
                Party::new("A", "x", "a", 3, 2),
                Party::new("B1", "y1", "b1", 2, 2),
                Party::new("B2", "y2", "b2", 2, 2),
            ],
        }
    }

    /// Two parties with binary outcomes.
    pub fn bipartite(inputs_a: usize, inputs_b: usize) -> Self {
        Self {
            parties: vec![
                Party::new("A", "x", "a", inputs_a, 2),
                Party::new("B", "y", "b", inputs_b, 2),
            ],
        }
    }

    pub fn chsh() -> Self {
        Self::bipartite(2, 2)
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn party(&self, k: usize) -> &Party {
        &self.parties[k]
    }

    pub fn num_parties(&self) -> usize {
        self.parties.len()
    }

    pub fn input_counts(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.inputs).collect()
    }

    pub fn output_counts(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.outputs).collect()
    }

    pub fn num_input_tuples(&self) -> usize {
        self.parties.iter().map(|p| p.inputs).product()
    }

    pub fn num_outcome_tuples(&self) -> usize {
        self.parties.iter().map(|p| p.outputs).product()
    }

    /// Number of cells in a flattened table.
    pub fn table_len(&self) -> usize {
        self.num_input_tuples() * self.num_outcome_tuples()
    }

    pub fn is_dichotomic(&self) -> bool {
        self.parties.iter().all(|p| p.outputs == 2)
    }

    pub fn input_index(&self, inputs: &[usize]) -> usize {
        inputs
            .iter()
            .zip(&self.parties)
            .fold(0, |acc, (&x, p)| acc * p.inputs + x)
    }

    pub fn outcome_index(&self, outcomes: &[usize]) -> usize {
        outcomes
            .iter()
            .zip(&self.parties)
            .fold(0, |acc, (&a, p)| acc * p.outputs + a)
    }

    pub fn index(&self, inputs: &[usize], outcomes: &[usize]) -> usize {
        self.input_index(inputs) * self.num_outcome_tuples() + self.outcome_index(outcomes)
    }

    pub fn input_tuple(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.parties.len()];
        for (k, p) in self.parties.iter().enumerate().rev() {
            out[k] = index % p.inputs;
            index /= p.inputs;
        }
        out
    }

    pub fn outcome_tuple(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.parties.len()];
        for (k, p) in self.parties.iter().enumerate().rev() {
            out[k] = index % p.outputs;
            index /= p.outputs;
        }
        out
    }

    /// Inverse of [`Scenario::index`].
    pub fn decode(&self, cell: usize) -> (Vec<usize>, Vec<usize>) {
        let n = self.num_outcome_tuples();
        (self.input_tuple(cell / n), self.outcome_tuple(cell % n))
    }

    /// All input tuples in storage order.
    pub fn input_tuples(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.num_input_tuples()).map(|i| self.input_tuple(i))
    }

    /// All outcome tuples in storage order.
    pub fn outcome_tuples(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.num_outcome_tuples()).map(|i| self.outcome_tuple(i))
    }

    /// The scenario restricted to `parties` (strictly ascending).
    pub fn restrict(&self, parties: &[usize]) -> Result<Scenario> {
        if parties.is_empty()
            || parties.windows(2).any(|w| w[0] >= w[1])
            || parties.iter().any(|&k| k >= self.parties.len())
        {
            return Err(Error::Scenario(format!(
                "invalid party subset {parties:?} for {} parties",
                self.parties.len()
            )));
        }
        Ok(Scenario {
            parties: parties.iter().map(|&k| self.parties[k].clone()).collect(),
        })
    }

    /// Index of the party whose name is `name`.
    pub fn party_index(&self, name: &str) -> Option<usize> {
        self.parties.iter().position(|p| p.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let s = Scenario::broadcast();
        assert_eq!(s.table_len(), 12 * 8);
        for cell in 0..s.table_len() {
            let (x, a) = s.decode(cell);
            assert_eq!(s.index(&x, &a), cell);
        }
        assert_eq!(s.index(&[0, 0, 1], &[0, 0, 0]), 8);
        assert_eq!(s.index(&[0, 0, 0], &[1, 0, 0]), 4);
    }

    #[test]
    fn rejects_degenerate_scenarios() {
        assert!(Scenario::new(vec![]).is_err());
        assert!(Scenario::new(vec![Party::new("A", "x", "a", 0, 2)]).is_err());
        assert!(Scenario::new(vec![Party::new("A", "x", "a", 2, 2), Party::new("B", "x", "b", 2, 2)]).is_err());
        assert!(Scenario::broadcast().restrict(&[1, 0]).is_err());
        assert_eq!(Scenario::broadcast().restrict(&[0, 2]).unwrap().party(1).name, "B2");
    }
}
