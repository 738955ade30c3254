use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::behavior::Scenario;
use crate::{Error, Result};

/// Projector `P_{outcome|input}` of one party. Only non-redundant outcomes
/// (all but the last) are used as symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Symbol {
    pub party: u8,
    pub input: u8,
    pub outcome: u8,
}

impl Symbol {
    pub fn new(party: usize, input: usize, outcome: usize) -> Self {
        let narrow = |v: usize| u8::try_from(v).expect("operator index exceeds 255");
        Self {
            party: narrow(party),
            input: narrow(input),
            outcome: narrow(outcome),
        }
    }
}

/// Canonical product of projectors, or the zero operator.
///
/// Parties commute, so symbols are grouped by party in ascending order with
/// each party's subsequence kept in its original order. Within a party,
/// repeated projectors collapse and orthogonal ones annihilate the word.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word {
    symbols: Vec<Symbol>,
    zero: bool,
}

impl Word {
    pub fn identity() -> Self {
        Self {
            symbols: Vec::new(),
            zero: false,
        }
    }

    pub fn zero() -> Self {
        Self {
            symbols: Vec::new(),
            zero: true,
        }
    }

    pub fn from_symbols(symbols: Vec<Symbol>) -> Self {
        canonicalize(symbols)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn is_identity(&self) -> bool {
        !self.zero && self.symbols.is_empty()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Product `self · other`.
    pub fn mul(&self, other: &Word) -> Word {
        if self.zero || other.zero {
            return Word::zero();
        }
        let mut s = self.symbols.clone();
        s.extend_from_slice(&other.symbols);
        canonicalize(s)
    }

    /// Hermitian adjoint (reversed order).
    pub fn adjoint(&self) -> Word {
        if self.zero {
            return Word::zero();
        }
        canonicalize(self.symbols.iter().rev().copied().collect())
    }

    /// Whether the word mentions `party`.
    pub fn touches(&self, party: usize) -> bool {
        self.symbols.iter().any(|s| s.party as usize == party)
    }

    /// At most one symbol per party: a joint outcome probability.
    pub fn is_observable_product(&self) -> bool {
        !self.zero && self.symbols.windows(2).all(|w| w[0].party != w[1].party)
    }

    /// Three bytes per symbol; a zero word is `[0xff]`.
    pub fn to_bytes(&self) -> Vec<u8> {
        if self.zero {
            return vec![0xff];
        }
        self.symbols
            .iter()
            .flat_map(|s| [s.party, s.input, s.outcome])
            .collect()
    }

    /// Moment key shared by `w` and `w†`, which have equal real moments.
    pub fn moment_key(&self) -> Vec<u8> {
        let a = self.to_bytes();
        let b = self.adjoint().to_bytes();
        a.min(b)
    }
}

/// Applies commutation across parties, idempotence and orthogonality.
pub fn canonicalize(mut symbols: Vec<Symbol>) -> Word {
    symbols.sort_by_key(|s| s.party);
    let mut out: Vec<Symbol> = Vec::with_capacity(symbols.len());
    for s in symbols {
        if let Some(top) = out.last() {
            if top.party == s.party && top.input == s.input {
                if top.outcome == s.outcome {
                    continue;
                }
                return Word::zero();
            }
        }
        out.push(s);
    }
    Word {
        symbols: out,
        zero: false,
    }
}

/// Alphabet of the operator algebra: letter, input count and outcome
/// count for each party.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Algebra {
    pub letters: Vec<char>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

impl Algebra {
    /// Observed parties of a scenario, lettered `A`, `B`, `C`, …
    /// (skipping `E`).
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let letters = ('A'..='Z').filter(|&c| c != 'E').take(scenario.num_parties()).collect();
        Self {
            letters,
            inputs: scenario.input_counts(),
            outputs: scenario.output_counts(),
        }
    }

    /// Adds an adversary `E` with one input and `outcomes` outcomes.
    pub fn with_eve(mut self, outcomes: usize) -> Self {
        self.letters.push('E');
        self.inputs.push(1);
        self.outputs.push(outcomes);
        self
    }

    pub fn num_parties(&self) -> usize {
        self.letters.len()
    }

    pub fn party_of_letter(&self, letter: char) -> Option<usize> {
        self.letters.iter().position(|&c| c == letter)
    }

    /// Non-redundant projectors of one party.
    pub fn party_symbols(&self, party: usize) -> Vec<Symbol> {
        (0..self.inputs[party])
            .flat_map(|x| (0..self.outputs[party] - 1).map(move |a| Symbol::new(party, x, a)))
            .collect()
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        (0..self.num_parties()).flat_map(|p| self.party_symbols(p)).collect()
    }

    pub fn display(&self, w: &Word) -> String {
        if w.is_zero() {
            return "0".into();
        }
        if w.is_identity() {
            return "1".into();
        }
        w.symbols()
            .iter()
            .map(|s| {
                let letter = self.letters[s.party as usize];
                if self.outputs[s.party as usize] == 2 {
                    format!("{letter}{}", s.input)
                } else {
                    format!("{letter}{}|{}", s.input, s.outcome)
                }
            })
            .collect()
    }
}

/// Hierarchy level: all words up to a length, plus pattern families of
/// one-symbol-per-party products.
///
/// Textual form: `"2"`, `"1+AB"`, `"2+AB+ABE"`, or `"local"` (length 2 plus
/// every product with at most one symbol per party).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Level {
    pub length: usize,
    /// Each pattern lists party letters, e.g. `"AB"`.
    pub patterns: Vec<String>,
    /// Include every product with at most one symbol per party.
    pub all_products: bool,
}

impl Level {
    pub fn length(k: usize) -> Self {
        Self {
            length: k,
            patterns: Vec::new(),
            all_products: false,
        }
    }

    pub fn local() -> Self {
        Self {
            length: 2,
            patterns: Vec::new(),
            all_products: true,
        }
    }
}

impl Default for Level {
    fn default() -> Self {
        Self::local()
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::local() {
            return write!(f, "local");
        }
        write!(f, "{}", self.length)?;
        for p in &self.patterns {
            write!(f, "+{p}")?;
        }
        if self.all_products {
            write!(f, "+products")?;
        }
        Ok(())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("local") {
            return Ok(Self::local());
        }
        let mut parts = s.split('+');
        let head = parts.next().unwrap_or("");
        let length: usize = head
            .trim()
            .parse()
            .map_err(|_| Error::Validation(format!("level `{s}`: expected a word length, found `{head}`")))?;
        if length == 0 {
            return Err(Error::Validation(format!(
                "level `{s}`: word length must be at least 1"
            )));
        }
        let mut level = Self::length(length);
        for p in parts {
            let p = p.trim();
            if p == "products" {
                level.all_products = true;
            } else if !p.is_empty() && p.chars().all(|c| c.is_ascii_uppercase()) {
                level.patterns.push(p.to_string());
            } else {
                return Err(Error::Validation(format!("level `{s}`: bad pattern `{p}`")));
            }
        }
        Ok(level)
    }
}

impl TryFrom<String> for Level {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Level> for String {
    fn from(l: Level) -> String {
        l.to_string()
    }
}

/// Products with one symbol from each listed party.
fn pattern_words(algebra: &Algebra, parties: &[usize]) -> Vec<Word> {
    let mut words = vec![Vec::new()];
    for &p in parties {
        let syms = algebra.party_symbols(p);
        words = words
            .into_iter()
            .flat_map(|w: Vec<Symbol>| {
                syms.iter().map(move |&s| {
                    let mut w = w.clone();
                    w.push(s);
                    w
                })
            })
            .collect();
    }
    words.into_iter().map(canonicalize).collect()
}

/// Deduplicated canonical monomials for `level`, ordered by length then
/// bytes. Pattern letters absent from the algebra (such as `E` when Eve is
/// modeled by blocks) are skipped.
pub fn generate_monomials(algebra: &Algebra, level: &Level) -> Result<Vec<Word>> {
    let symbols = algebra.symbols();
    let mut set: BTreeSet<Word> = BTreeSet::new();
    set.insert(Word::identity());
    let mut frontier = vec![Word::identity()];
    for _ in 0..level.length {
        let mut next = Vec::new();
        for w in &frontier {
            for &s in &symbols {
                let v = w.mul(&Word::from_symbols(vec![s]));
                if !v.is_zero() && set.insert(v.clone()) {
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    for p in &level.patterns {
        let mut parties = Vec::new();
        for c in p.chars() {
            match algebra.party_of_letter(c) {
                Some(k) => parties.push(k),
                None if c == 'E' => {}
                None => {
                    return Err(Error::Validation(format!(
                        "level pattern `{p}` names party `{c}` outside the scenario"
                    )))
                }
            }
        }
        set.extend(pattern_words(algebra, &parties).into_iter().filter(|w| !w.is_zero()));
    }
    if level.all_products {
        let n = algebra.num_parties();
        for mask in 1usize..(1 << n) {
            let parties: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
            set.extend(pattern_words(algebra, &parties));
        }
    }
    let mut out: Vec<Word> = set.into_iter().collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.to_bytes().cmp(&b.to_bytes())));
    Ok(out)
}
