use num_traits::ToPrimitive;
use serde::Serialize;

use super::simplex::solve_standard_form;
use super::VertexSet;
use crate::behavior::Behavior;
use crate::{Error, Result};

pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-8;

/// Separating functional `f` on table cells: `f·v ≤ bound` on every vertex
/// while `f·p = value`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub coefficients: Vec<f64>,
    pub bound: f64,
    pub value: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LpStatus {
    Inside {
        weights: Vec<f64>,
        reconstruction_error: f64,
    },
    Outside(Certificate),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpResult {
    pub status: LpStatus,
    /// Optimal L1 distance between the behavior and the hull.
    pub slack: f64,
    pub iterations: usize,
}

impl LpResult {
    pub fn is_inside(&self) -> bool {
        matches!(self.status, LpStatus::Inside { .. })
    }
}

/// Decides whether `behavior` lies in the convex hull of `vertices`.
///
/// Solves `min Σ_c (d⁺_c + d⁻_c)` subject to
/// `Σ_v w_v v_c + d⁺_c − d⁻_c = p_c`, `Σ_v w_v = 1`, all variables ≥ 0.
/// When the optimum exceeds `tol`, the cell duals form the separating
/// functional, whose bound is recomputed from the exact vertex tables.
pub fn membership_lp(behavior: &Behavior, vertices: &VertexSet, tol: f64) -> Result<LpResult> {
    if behavior.scenario() != vertices.scenario() {
        return Err(Error::Scenario("behavior and vertex set scenarios differ".into()));
    }
    if vertices.is_empty() {
        return Err(Error::Validation("empty vertex set".into()));
    }
    let cells = behavior.table().len();
    let nv = vertices.len();
    let exact: Vec<Vec<f64>> = vertices
        .exact()
        .iter()
        .map(|v| v.iter().map(|r| r.to_f64().expect("finite")).collect())
        .collect();
    let ncols = nv + 2 * cells;
    let mut a = vec![vec![0.0; ncols]; cells + 1];
    for (c, row) in a.iter_mut().take(cells).enumerate() {
        for (j, v) in exact.iter().enumerate() {
            row[j] = v[c];
        }
        row[nv + c] = 1.0;
        row[nv + cells + c] = -1.0;
    }
    a[cells][..nv].iter_mut().for_each(|v| *v = 1.0);
    let mut b = behavior.table().to_vec();
    b.push(1.0);
    let mut cost = vec![0.0; ncols];
    cost[nv..].iter_mut().for_each(|v| *v = 1.0);
    let sol = solve_standard_form(&a, &b, &cost)?;
    let slack = sol.objective;
    let status = if slack <= tol {
        let weights = sol.x[..nv].to_vec();
        let reconstruction_error = (0..cells)
            .map(|c| {
                let r: f64 = weights.iter().zip(&exact).map(|(w, v)| w * v[c]).sum();
                (r - b[c]).abs()
            })
            .fold(0.0, f64::max);
        LpStatus::Inside {
            weights,
            reconstruction_error,
        }
    } else {
        let coefficients = sol.y[..cells].to_vec();
        let dot = |v: &[f64]| -> f64 { coefficients.iter().zip(v).map(|(f, x)| f * x).sum() };
        let bound = exact.iter().map(|v| dot(v)).fold(f64::NEG_INFINITY, f64::max);
        let value = dot(behavior.table());
        LpStatus::Outside(Certificate {
            violation: value - bound,
            coefficients,
            bound,
            value,
        })
    };
    Ok(LpResult {
        status,
        slack,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::behavior::{born_behavior, Scenario};
    use crate::functionals::{broadcast, seesaw_optimize, SeesawConfig};
    use crate::quantum::{broadcast_apply, isotropic_state, IsometryChannel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vertices_are_inside_with_unit_weight() {
        let set = broadcast_local_vertices(&Scenario::broadcast()).unwrap();
        for i in [0, 17, 100, 191] {
            let r = membership_lp(&set.behavior(i), &set, DEFAULT_MEMBERSHIP_TOL).unwrap();
            match r.status {
                LpStatus::Inside {
                    weights,
                    reconstruction_error,
                } => {
                    assert!(reconstruction_error < 1e-12);
                    assert!((weights[i] - 1.0).abs() < 1e-9, "vertex {i}: {}", weights[i]);
                }
                _ => panic!("vertex {i} reported outside"),
            }
        }
    }

    #[test]
    fn uniform_is_inside() {
        let s = Scenario::broadcast();
        let set = broadcast_local_vertices(&s).unwrap();
        let r = membership_lp(&Behavior::uniform(s), &set, DEFAULT_MEMBERSHIP_TOL).unwrap();
        assert!(r.is_inside());
        if let LpStatus::Inside { weights, .. } = r.status {
            assert!(weights.iter().all(|&w| w >= -1e-12));
            assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ghz_behavior_is_outside_with_certificate() {
        let state = broadcast_apply(&isotropic_state(1.0).unwrap(), &IsometryChannel::copy(), 1).unwrap();
        let f = broadcast();
        let best = seesaw_optimize(
            &state,
            &f,
            &SeesawConfig {
                restarts: 10,
                ..Default::default()
            },
        )
        .unwrap();
        let b = born_behavior(f.scenario(), &state, &best.settings).unwrap();
        let set = broadcast_local_vertices(f.scenario()).unwrap();
        let r = membership_lp(&b, &set, DEFAULT_MEMBERSHIP_TOL).unwrap();
        match r.status {
            LpStatus::Outside(cert) => {
                assert!(cert.violation > DEFAULT_MEMBERSHIP_TOL);
                assert!(cert.value > cert.bound);
                for v in set.behaviors() {
                    let fv: f64 = cert.coefficients.iter().zip(v.table()).map(|(c, p)| c * p).sum();
                    assert!(fv <= cert.bound + 1e-12);
                }
            }
            _ => panic!("GHZ behavior reported broadcast-local"),
        }
    }

    #[test]
    fn mixed_alice_strategies_are_covered() {
        // A non-deterministic p(a|x) times a no-signaling vertex stays inside
        // the deterministic-Alice hull.
        let s = Scenario::broadcast();
        let set = broadcast_local_vertices(&s).unwrap();
        let ns = ns_vertices_222();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let pa: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let v = ns.behavior(rng.random_range(0..ns.len()));
            let b = Behavior::from_fn(s.clone(), |x, a| {
                let p = if a[0] == 0 { pa[x[0]] } else { 1.0 - pa[x[0]] };
                p * v.prob(&x[1..], &a[1..])
            });
            assert!(membership_lp(&b, &set, DEFAULT_MEMBERSHIP_TOL).unwrap().is_inside());
        }
    }

    #[test]
    fn verdict_invariant_under_relabeling() {
        let s = Scenario::chsh();
        let set = deterministic_vertices(&s);
        let flipped_set = VertexSet::new(
            s.clone(),
            set.behaviors()
                .iter()
                .map(|b| {
                    b.flip_outcome(1, 0)
                        .table()
                        .iter()
                        .map(|&p| num_rational::Rational64::from_integer(p as i64))
                        .collect()
                })
                .collect(),
        )
        .unwrap();
        let pr = ns_vertices_222()
            .behaviors()
            .into_iter()
            .find(|b| crate::functionals::chsh().eval(b).unwrap() > 3.0)
            .unwrap();
        let noisy = pr.mix(&Behavior::uniform(s.clone()), 0.6).unwrap();
        for p in [noisy.clone(), pr.mix(&Behavior::uniform(s), 0.4).unwrap()] {
            let a = membership_lp(&p, &set, 1e-8).unwrap().is_inside();
            let b = membership_lp(&p.flip_outcome(1, 0), &flipped_set, 1e-8)
                .unwrap()
                .is_inside();
            assert_eq!(a, b);
        }
        assert!(!membership_lp(&noisy, &set, 1e-8).unwrap().is_inside());
    }
}
