//! Locality polytopes and LP membership tests.
//!
//! Vertex tables are stored as exact rationals. A broadcast-local behavior
//! mixes a classical strategy for Alice with an arbitrary no-signaling box
//! shared by Bob₁ and Bob₂. Because the set of such products is convex in
//! Alice's response function, it suffices to take her deterministic
//! strategies: any `p(a|x,λ)` is a mixture of them, so every product vertex
//! `p(a|x)·q(b₁b₂|y₁y₂)` is itself a mixture of the 8 × 24 deterministic
//! products returned by [`broadcast_local_vertices`].

mod export;
mod membership;
mod simplex;

use std::sync::OnceLock;

use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};

use crate::behavior::{Behavior, Scenario};
use crate::functionals::CorrelatorFunctional;
use crate::{Error, Result};

pub use export::{write_certificate_csv, write_vertices_csv};
pub use membership::{membership_lp, Certificate, LpResult, LpStatus, DEFAULT_MEMBERSHIP_TOL};
pub use simplex::{solve_standard_form, LpSolution};

/// A finite list of extremal behaviors of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet {
    scenario: Scenario,
    vertices: Vec<Vec<Rational64>>,
}

impl VertexSet {
    /// Checks that every vertex is normalized, nonnegative and no-signaling
    /// (exactly), then sorts lexicographically and removes duplicates.
    pub fn new(scenario: Scenario, mut vertices: Vec<Vec<Rational64>>) -> Result<Self> {
        for v in &vertices {
            if v.len() != scenario.table_len() {
                return Err(Error::Dimension("vertex table has wrong length".into()));
            }
            let b = to_behavior(&scenario, v);
            let report = b.validate(0.0);
            if !report.passed() {
                return Err(Error::Validation(format!("vertex fails validation: {report:?}")));
            }
        }
        vertices.sort();
        vertices.dedup();
        Ok(Self { scenario, vertices })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn exact(&self) -> &[Vec<Rational64>] {
        &self.vertices
    }

    pub fn behavior(&self, i: usize) -> Behavior {
        to_behavior(&self.scenario, &self.vertices[i])
    }

    pub fn behaviors(&self) -> Vec<Behavior> {
        (0..self.len()).map(|i| self.behavior(i)).collect()
    }
}

fn to_behavior(scenario: &Scenario, v: &[Rational64]) -> Behavior {
    let table = v.iter().map(|r| r.to_f64().expect("finite rational")).collect();
    Behavior::new(scenario.clone(), table).expect("consistent length")
}

/// Exact correlator of a rational table (see [`Behavior::correlator`]).
fn exact_correlator(scenario: &Scenario, v: &[Rational64], assignment: &[(usize, usize)]) -> Rational64 {
    let n = scenario.num_outcome_tuples();
    let mut acc = Rational64::zero();
    let mut slices = 0i64;
    for (i, x) in scenario.input_tuples().enumerate() {
        if !assignment.iter().all(|&(k, xk)| x[k] == xk) {
            continue;
        }
        slices += 1;
        for (j, a) in scenario.outcome_tuples().enumerate() {
            let odd = assignment.iter().filter(|&&(k, _)| a[k] != 0).count() % 2 == 1;
            if odd {
                acc -= v[i * n + j];
            } else {
                acc += v[i * n + j];
            }
        }
    }
    acc / Rational64::from_integer(slices.max(1))
}

/// `max_v eval(f, v)`; correlators are computed in exact arithmetic and
/// combined with the functional's weights at the end.
pub fn local_bound(f: &CorrelatorFunctional, vertices: &VertexSet) -> Result<f64> {
    if f.scenario() != vertices.scenario() {
        return Err(Error::Scenario("functional and vertex set scenarios differ".into()));
    }
    if vertices.is_empty() {
        return Err(Error::Validation("empty vertex set".into()));
    }
    let best = vertices
        .exact()
        .iter()
        .map(|v| {
            f.terms()
                .iter()
                .map(|t| {
                    let c = exact_correlator(vertices.scenario(), v, &t.assignment);
                    t.weight * c.to_f64().expect("finite")
                })
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best)
}

/// All deterministic local strategies of a scenario.
pub fn deterministic_vertices(scenario: &Scenario) -> VertexSet {
    let per_party: Vec<Vec<Vec<usize>>> = scenario
        .parties()
        .iter()
        .map(|p| {
            let count = p.outputs.pow(p.inputs as u32);
            (0..count)
                .map(|mut s| {
                    (0..p.inputs)
                        .map(|_| {
                            let a = s % p.outputs;
                            s /= p.outputs;
                            a
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let total: usize = per_party.iter().map(Vec::len).product();
    let mut vertices = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut strategy = Vec::with_capacity(per_party.len());
        for options in per_party.iter().rev() {
            strategy.push(options[idx % options.len()].clone());
            idx /= options.len();
        }
        strategy.reverse();
        let table = (0..scenario.table_len())
            .map(|cell| {
                let (x, a) = scenario.decode(cell);
                let hit = (0..x.len()).all(|k| strategy[k][x[k]] == a[k]);
                if hit {
                    Rational64::one()
                } else {
                    Rational64::zero()
                }
            })
            .collect();
        vertices.push(table);
    }
    VertexSet::new(scenario.clone(), vertices).expect("deterministic tables are valid")
}

/// Solves a square rational system; `None` if singular.
fn solve_exact(mut a: Vec<Vec<Rational64>>, mut b: Vec<Rational64>) -> Option<Vec<Rational64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let factor = a[r][col] / a[col][col];
                for c in col..n {
                    let delta = factor * a[col][c];
                    a[r][c] -= delta;
                }
                let delta = factor * b[col];
                b[r] -= delta;
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// The 24 extreme points of the two-party, two-input, two-output
/// no-signaling polytope, by exact basis enumeration.
///
/// Coordinates: `θ = (p_A(0|0), p_A(0|1), p_B(0|0), p_B(0|1), p(00|xy)…)`.
/// Each of the 16 table entries is affine in `θ`; a vertex is a point where
/// 8 independent entries vanish and the other 8 are nonnegative.
pub fn ns_vertices_222() -> VertexSet {
    static CACHE: OnceLock<VertexSet> = OnceLock::new();
    CACHE.get_or_init(enumerate_ns_222).clone()
}

fn enumerate_ns_222() -> VertexSet {
    let scenario = Scenario::chsh();
    let r = Rational64::from_integer;
    // Rows (g, h) with entry = g·θ + h, in table storage order.
    let mut rows: Vec<([Rational64; 8], Rational64)> = Vec::with_capacity(16);
    for x in 0..2 {
        for y in 0..2 {
            let c = 4 + 2 * x + y;
            for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let mut g = [r(0); 8];
                let mut h = r(0);
                match (a, b) {
                    (0, 0) => g[c] = r(1),
                    (0, 1) => {
                        g[x] = r(1);
                        g[c] = r(-1);
                    }
                    (1, 0) => {
                        g[2 + y] = r(1);
                        g[c] = r(-1);
                    }
                    _ => {
                        g[x] = r(-1);
                        g[2 + y] = r(-1);
                        g[c] = r(1);
                        h = r(1);
                    }
                }
                rows.push((g, h));
            }
        }
    }
    let mut vertices = Vec::new();
    for mask in 0u32..(1 << 16) {
        if mask.count_ones() != 8 {
            continue;
        }
        let tight: Vec<usize> = (0..16).filter(|i| mask >> i & 1 == 1).collect();
        let a: Vec<Vec<Rational64>> = tight.iter().map(|&i| rows[i].0.to_vec()).collect();
        let b: Vec<Rational64> = tight.iter().map(|&i| -rows[i].1).collect();
        let Some(theta) = solve_exact(a, b) else { continue };
        let table: Vec<Rational64> = rows
            .iter()
            .map(|(g, h)| g.iter().zip(&theta).fold(*h, |acc, (gi, ti)| acc + gi * ti))
            .collect();
        if table.iter().all(|v| *v >= Rational64::zero()) {
            vertices.push(table);
        }
    }
    VertexSet::new(scenario, vertices).expect("enumerated vertices are valid")
}

/// Products of Alice's deterministic strategies with the no-signaling
/// vertices of (Bob₁, Bob₂): 8 × 24 = 192 for the broadcast scenario.
pub fn broadcast_local_vertices(scenario: &Scenario) -> Result<VertexSet> {
    let ps = scenario.parties();
    if ps.len() != 3 || ps[0].outputs != 2 || ps[1..].iter().any(|p| p.inputs != 2 || p.outputs != 2) {
        return Err(Error::Scenario(
            "broadcast-local vertices need a dichotomic Alice and 2x2 Bobs".into(),
        ));
    }
    let ns = ns_vertices_222();
    let bob = Scenario::chsh();
    let alice_inputs = ps[0].inputs;
    let mut vertices = Vec::with_capacity((1 << alice_inputs) * ns.len());
    for strategy in 0..(1usize << alice_inputs) {
        for v in ns.exact() {
            let table = (0..scenario.table_len())
                .map(|cell| {
                    let (x, a) = scenario.decode(cell);
                    if (strategy >> x[0]) & 1 != a[0] {
                        Rational64::zero()
                    } else {
                        v[bob.index(&x[1..], &a[1..])]
                    }
                })
                .collect();
            vertices.push(table);
        }
    }
    VertexSet::new(scenario.clone(), vertices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{broadcast, chained, chsh};

    #[test]
    fn ns_222_has_24_vertices() {
        let ns = ns_vertices_222();
        assert_eq!(ns.len(), 24);
        let det = deterministic_vertices(&Scenario::chsh());
        assert_eq!(det.len(), 16);
        for d in det.exact() {
            assert!(ns.exact().contains(d));
        }
        // The other 8 are PR boxes: |CHSH| = 4 under one of the 8 relabelings.
        let f = chsh();
        let mut nonlocal = 0;
        for b in ns.behaviors() {
            assert!(b.validate(1e-14).passed());
            let best = (0..8)
                .map(|sym| {
                    let mut c = b.clone();
                    if sym & 1 == 1 {
                        c = c.flip_outcome(0, 0);
                    }
                    if sym & 2 == 2 {
                        c = c.flip_outcome(0, 1);
                    }
                    if sym & 4 == 4 {
                        c = c.flip_outcome(1, 0);
                    }
                    f.eval(&c).unwrap().abs()
                })
                .fold(0.0, f64::max);
            if (best - 4.0).abs() < 1e-12 {
                nonlocal += 1;
            } else {
                assert!((best - 2.0).abs() < 1e-12);
            }
        }
        assert_eq!(nonlocal, 8);
    }

    #[test]
    fn pr_boxes_match_closed_form() {
        // p(ab|xy) = 1/2 iff a ⊕ b = xy ⊕ αx ⊕ βy ⊕ γ.
        let s = Scenario::chsh();
        let ns = ns_vertices_222();
        for sym in 0..8 {
            let (al, be, ga) = (sym & 1, (sym >> 1) & 1, (sym >> 2) & 1);
            let table: Vec<Rational64> = (0..s.table_len())
                .map(|cell| {
                    let (x, a) = s.decode(cell);
                    let target = (x[0] & x[1]) ^ (al & x[0]) ^ (be & x[1]) ^ ga;
                    if a[0] ^ a[1] == target {
                        Rational64::new(1, 2)
                    } else {
                        Rational64::zero()
                    }
                })
                .collect();
            assert!(ns.exact().contains(&table), "PR box {sym} missing");
        }
    }

    #[test]
    fn broadcast_vertex_counts_and_bounds() {
        let s = Scenario::broadcast();
        let bl = broadcast_local_vertices(&s).unwrap();
        assert_eq!(bl.len(), 192);
        assert_eq!(local_bound(&broadcast(), &bl).unwrap(), 4.0);
        assert_eq!(deterministic_vertices(&s).len(), 128);
        assert_eq!(
            local_bound(&chsh(), &deterministic_vertices(&Scenario::chsh())).unwrap(),
            2.0
        );
        let c3 = chained(3).unwrap();
        assert_eq!(local_bound(&c3, &deterministic_vertices(c3.scenario())).unwrap(), 4.0);
        assert!(broadcast_local_vertices(&Scenario::chsh()).is_err());
    }

    #[test]
    fn chained_bound_is_two_n_minus_two() {
        for n in 2..=5 {
            let f = chained(n).unwrap();
            let b = local_bound(&f, &deterministic_vertices(f.scenario())).unwrap();
            assert_eq!(b, (2 * n - 2) as f64);
        }
    }

    #[test]
    fn empty_or_mismatched_sets_rejected() {
        let empty = VertexSet::new(Scenario::chsh(), vec![]).unwrap();
        assert!(local_bound(&chsh(), &empty).is_err());
        assert!(local_bound(&broadcast(), &ns_vertices_222()).is_err());
    }
}
