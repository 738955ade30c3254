use std::collections::BTreeMap;
use std::ops::Bound;

use super::ConicProgram;
use crate::{Error, Result};

const RANK_TOL: f64 = 1e-10;

type Key = (usize, usize, usize);

/// A program with linearly dependent constraints removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub program: ConicProgram,
    /// Original indices of the retained constraints, ascending.
    pub kept: Vec<usize>,
    /// Original indices of dropped (dependent, consistent) constraints.
    pub removed: Vec<usize>,
}

impl Preprocessed {
    /// Expands duals of the reduced program to the original constraint list,
    /// with zeros on dropped rows.
    pub fn expand_dual(&self, y: &[f64], original_len: usize) -> Vec<f64> {
        let mut out = vec![0.0; original_len];
        for (&k, &v) in self.kept.iter().zip(y) {
            out[k] = v;
        }
        out
    }
}

/// Removes constraints that are linear combinations of earlier ones, using
/// sparse Gaussian elimination with a relative drop threshold of `1e-10`.
///
/// A dependent row whose right-hand side disagrees with the combination
/// makes the program infeasible, reported as [`Error::Infeasible`].
pub fn preprocess(program: &ConicProgram) -> Result<Preprocessed> {
    let mut pivots: BTreeMap<Key, (BTreeMap<Key, f64>, f64)> = BTreeMap::new();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (idx, (entries, &rhs0)) in program.a.iter().zip(&program.b).enumerate() {
        let mut row: BTreeMap<Key, f64> = entries.iter().map(|e| ((e.block, e.i, e.j), e.value)).collect();
        let mut rhs = rhs0;
        let scale = row.values().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut cursor: Option<Key> = None;
        loop {
            let lower = cursor.map_or(Bound::Unbounded, Bound::Excluded);
            let next = row
                .range((lower, Bound::Unbounded))
                .find(|(k, _)| pivots.contains_key(k))
                .map(|(k, v)| (*k, *v));
            let Some((key, factor)) = next else { break };
            let (prow, prhs) = &pivots[&key];
            for (k, v) in prow {
                *row.entry(*k).or_insert(0.0) -= factor * v;
            }
            rhs -= factor * prhs;
            row.remove(&key);
            cursor = Some(key);
        }
        row.retain(|_, v| v.abs() > RANK_TOL * scale.max(1e-300));
        match row.iter().next().map(|(k, v)| (*k, *v)) {
            None => {
                if rhs.abs() > RANK_TOL * (1.0 + rhs0.abs()) * 1e2 {
                    return Err(Error::Infeasible(format!(
                        "constraint {idx} is a combination of earlier ones with inconsistent right-hand side (residual {rhs:e})"
                    )));
                }
                removed.push(idx);
            }
            Some((key, lead)) => {
                let normalized = row.into_iter().map(|(k, v)| (k, v / lead)).collect();
                pivots.insert(key, (normalized, rhs / lead));
                kept.push(idx);
            }
        }
    }
    let mut reduced = ConicProgram::new(program.blocks.clone())?;
    reduced.c = program.c.clone();
    for &k in &kept {
        reduced.a.push(program.a[k].clone());
        reduced.b.push(program.b[k]);
    }
    Ok(Preprocessed {
        program: reduced,
        kept,
        removed,
    })
}
