//! Spot-checking expansion protocol with a simulated device.

use std::io::{Read, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RateParams;
use crate::behavior::{Behavior, Scenario};
use crate::functionals::GameSpec;
use crate::{Error, Result};

/// Source of joint outcomes for given inputs.
pub trait OutcomeSampler {
    fn scenario(&self) -> &Scenario;
    fn sample(&self, inputs: &[usize], rng: &mut dyn RngCore) -> Vec<usize>;
}

/// Draws outcomes i.i.d. from a behavior.
#[derive(Debug, Clone)]
pub struct BehaviorSampler {
    behavior: Behavior,
    cumulative: Vec<f64>,
}

impl BehaviorSampler {
    /// Fails for tables that are not normalized and nonnegative within `1e-9`.
    pub fn new(behavior: Behavior) -> Result<Self> {
        let report = behavior.validate(1e-9);
        if report.normalization > 1e-9 || report.negativity > 1e-9 {
            return Err(Error::Validation(format!(
                "sampler needs a probability table (normalization {:.1e}, negativity {:.1e})",
                report.normalization, report.negativity
            )));
        }
        let n = behavior.scenario().num_outcome_tuples();
        let mut cumulative = Vec::with_capacity(behavior.table().len());
        for row in behavior.table().chunks(n) {
            let mut acc = 0.0;
            cumulative.extend(row.iter().map(|p| {
                acc += p.max(0.0);
                acc
            }));
        }
        Ok(Self { behavior, cumulative })
    }

    /// A device that wins `game` with probability exactly `omega`.
    ///
    /// On every asked input the winning outcome tuples share `omega` equally
    /// and the losing ones share `1 − omega`; other inputs are uniform.
    pub fn with_score(game: &GameSpec, omega: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&omega) {
            return Err(Error::Domain {
                name: "omega",
                value: omega,
            });
        }
        let s = game.scenario().clone();
        let mut table = Vec::with_capacity(s.table_len());
        for x in s.input_tuples() {
            let wins: Vec<bool> = s.outcome_tuples().map(|a| game.wins(&x, &a)).collect();
            let w = wins.iter().filter(|&&b| b).count();
            let l = wins.len() - w;
            if game.probability(&x) == 0.0 {
                table.extend(std::iter::repeat_n(1.0 / wins.len() as f64, wins.len()));
            } else if w == 0 || l == 0 {
                return Err(Error::Validation(format!("inputs {x:?} cannot be both won and lost")));
            } else {
                table.extend(
                    wins.iter()
                        .map(|&b| if b { omega / w as f64 } else { (1.0 - omega) / l as f64 }),
                );
            }
        }
        Self::new(Behavior::new(s, table)?)
    }

    pub fn behavior(&self) -> &Behavior {
        &self.behavior
    }
}

impl OutcomeSampler for BehaviorSampler {
    fn scenario(&self) -> &Scenario {
        self.behavior.scenario()
    }

    fn sample(&self, inputs: &[usize], rng: &mut dyn RngCore) -> Vec<usize> {
        let s = self.behavior.scenario();
        let n = s.num_outcome_tuples();
        let start = s.input_index(inputs) * n;
        let row = &self.cumulative[start..start + n];
        let u = rng.random::<f64>() * row[n - 1];
        let j = row.partition_point(|&c| c <= u).min(n - 1);
        s.outcome_tuple(j)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round {
    pub test: bool,
    pub inputs: Vec<usize>,
    pub outcomes: Vec<usize>,
    /// Win flag on test rounds, `None` on generation rounds.
    pub won: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub scenario: Scenario,
    pub rounds: Vec<Round>,
    pub tests: u64,
    pub failures: u64,
    /// Failure counts above this abort the run.
    pub threshold: f64,
    pub aborted: bool,
}

impl Transcript {
    /// Rebuilds counts and the abort decision from rounds.
    pub fn from_rounds(scenario: Scenario, rounds: Vec<Round>, params: &RateParams) -> Result<Self> {
        for (i, r) in rounds.iter().enumerate() {
            if r.test != r.won.is_some() {
                return Err(Error::Validation(format!(
                    "round {i}: U must be ⊥ exactly on generation rounds"
                )));
            }
        }
        let tests = rounds.iter().filter(|r| r.test).count() as u64;
        let failures = rounds.iter().filter(|r| r.won == Some(false)).count() as u64;
        Ok(Self {
            scenario,
            rounds,
            tests,
            failures,
            threshold: params.abort_threshold(),
            aborted: params.aborts(failures),
        })
    }

    pub fn win_frequency(&self) -> f64 {
        (self.tests - self.failures) as f64 / self.tests as f64
    }

    /// Outcomes of the first two parties on generation rounds, one bit each.
    pub fn output_bits(&self) -> Result<Vec<bool>> {
        if self.scenario.num_parties() < 2 || self.scenario.parties()[..2].iter().any(|p| p.outputs != 2) {
            return Err(Error::Scenario("output bits need two binary parties".into()));
        }
        Ok(self
            .rounds
            .iter()
            .filter(|r| !r.test)
            .flat_map(|r| [r.outcomes[0] == 1, r.outcomes[1] == 1])
            .collect())
    }
}

/// Runs `params.n` rounds: test rounds with probability `γ` draw inputs
/// from the game and score them, generation rounds use all-zero inputs.
///
/// Round `i` draws from its own ChaCha stream, so transcripts depend on the
/// seed alone.
pub fn simulate_protocol(
    sampler: &dyn OutcomeSampler,
    params: &RateParams,
    game: &GameSpec,
    seed: u64,
) -> Result<Transcript> {
    params.validate()?;
    if sampler.scenario() != game.scenario() {
        return Err(Error::Scenario("sampler and game scenarios differ".into()));
    }
    let zeros = vec![0; game.scenario().num_parties()];
    let rounds = (0..params.n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let test = rng.random::<f64>() < params.gamma;
            let inputs = if test {
                game.sample_inputs(&mut rng).to_vec()
            } else {
                zeros.clone()
            };
            let outcomes = sampler.sample(&inputs, &mut rng);
            let won = test.then(|| game.wins(&inputs, &outcomes));
            Round {
                test,
                inputs,
                outcomes,
                won,
            }
        })
        .collect();
    Transcript::from_rounds(game.scenario().clone(), rounds, params)
}

const UNDEFINED: &str = "⊥";

/// Writes `round,T,<inputs>,<outputs>,U`, e.g. `round,T,x,y1,y2,a,b1,b2,U`.
pub fn write_transcript_csv<W: Write>(t: &Transcript, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let s = &t.scenario;
    let mut header = vec!["round".to_string(), "T".to_string()];
    header.extend(s.parties().iter().map(|p| p.input_label.clone()));
    header.extend(s.parties().iter().map(|p| p.output_label.clone()));
    header.push("U".into());
    w.write_record(&header)?;
    for (i, r) in t.rounds.iter().enumerate() {
        let mut rec = vec![i.to_string(), u8::from(r.test).to_string()];
        rec.extend(r.inputs.iter().chain(&r.outcomes).map(usize::to_string));
        rec.push(match r.won {
            None => UNDEFINED.into(),
            Some(b) => u8::from(b).to_string(),
        });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_transcript_csv<R: Read>(scenario: &Scenario, params: &RateParams, reader: R) -> Result<Transcript> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let n = scenario.num_parties();
    let width = 2 * n + 3;
    if rdr.headers()?.len() != width {
        return Err(Error::parse(1, format!("expected {width} columns")));
    }
    let mut rounds = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(row + 2, |p| p.line() as usize);
        let field = |c: usize| -> Result<usize> {
            record[c]
                .parse::<usize>()
                .map_err(|e| Error::parse(line, format!("column {}: {e}", c + 1)))
        };
        if field(0)? != row {
            return Err(Error::parse(line, "rounds must be numbered consecutively from 0"));
        }
        let test = match field(1)? {
            0 => false,
            1 => true,
            v => return Err(Error::parse(line, format!("T must be 0 or 1, got {v}"))),
        };
        let inputs = (0..n).map(|k| field(2 + k)).collect::<Result<Vec<_>>>()?;
        let outcomes = (0..n).map(|k| field(2 + n + k)).collect::<Result<Vec<_>>>()?;
        for (k, p) in scenario.parties().iter().enumerate() {
            if inputs[k] >= p.inputs || outcomes[k] >= p.outputs {
                return Err(Error::parse(line, format!("party {} index out of range", p.name)));
            }
        }
        let won = match &record[width - 1] {
            UNDEFINED => None,
            "0" => Some(false),
            "1" => Some(true),
            v => return Err(Error::parse(line, format!("U must be 0, 1 or {UNDEFINED}, got {v:?}"))),
        };
        rounds.push(Round {
            test,
            inputs,
            outcomes,
            won,
        });
    }
    Transcript::from_rounds(scenario.clone(), rounds, params)
}
