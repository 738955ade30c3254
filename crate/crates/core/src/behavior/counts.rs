use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{Behavior, Scenario};
use crate::{Error, Result};

/// Bootstrap resamples drawn when none are requested explicitly.
pub const DEFAULT_RESAMPLES: usize = 200;

/// Event counts per (inputs, outcomes) cell, in the behavior storage order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsTable {
    scenario: Scenario,
    counts: Vec<u64>,
}

impl CountsTable {
    pub fn new(scenario: Scenario, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != scenario.table_len() {
            return Err(Error::Dimension(format!(
                "counts table has {} cells, scenario needs {}",
                counts.len(),
                scenario.table_len()
            )));
        }
        Ok(Self { scenario, counts })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of trials recorded for each input tuple.
    pub fn totals(&self) -> Vec<u64> {
        self.counts
            .chunks(self.scenario.num_outcome_tuples())
            .map(|row| row.iter().sum())
            .collect()
    }

    fn frequencies(scenario: &Scenario, counts: &[f64]) -> Behavior {
        let n = scenario.num_outcome_tuples();
        let mut table = counts.to_vec();
        for row in table.chunks_mut(n) {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
        }
        Behavior {
            scenario: scenario.clone(),
            table,
        }
    }
}

/// Maximum-likelihood behavior plus Poissonian bootstrap resamples.
///
/// Each resample redraws every cell from a Poisson law with the observed
/// count as mean and renormalizes per input tuple; a row that comes out
/// empty is redrawn. Resample `r` uses its own ChaCha stream `r` under
/// `seed`, so results do not depend on evaluation order.
pub fn behavior_from_counts(counts: &CountsTable, resamples: usize, seed: u64) -> Result<(Behavior, Vec<Behavior>)> {
    let scenario = &counts.scenario;
    if let Some(i) = counts.totals().iter().position(|&t| t == 0) {
        return Err(Error::Validation(format!(
            "no trials recorded for inputs {:?}",
            scenario.input_tuple(i)
        )));
    }
    let observed: Vec<f64> = counts.counts.iter().map(|&c| c as f64).collect();
    let point = CountsTable::frequencies(scenario, &observed);
    let n = scenario.num_outcome_tuples();
    let laws: Vec<Option<Poisson<f64>>> = observed
        .iter()
        .map(|&c| if c > 0.0 { Poisson::new(c).ok() } else { None })
        .collect();
    let mut draws = Vec::with_capacity(resamples);
    for r in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let mut sample = vec![0.0; observed.len()];
        for (row, laws_row) in sample.chunks_mut(n).zip(laws.chunks(n)) {
            loop {
                for (v, law) in row.iter_mut().zip(laws_row) {
                    *v = law.as_ref().map_or(0.0, |l| l.sample(&mut rng));
                }
                if row.iter().sum::<f64>() > 0.0 {
                    break;
                }
            }
        }
        draws.push(CountsTable::frequencies(scenario, &sample));
    }
    Ok((point, draws))
}
