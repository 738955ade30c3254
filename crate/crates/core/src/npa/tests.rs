use super::*;
use crate::behavior::born_behavior;
use crate::functionals::{self, seesaw_optimize, SeesawConfig};
use crate::locality::broadcast_local_vertices;
use crate::quantum::{broadcast_apply, isotropic_state, IsometryChannel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn solve_level(scenario: &Scenario, target: &Target, c: &Constraint, level: &str, f: Formulation) -> PguessReport {
    let p = assemble_sdp(scenario, target, c, &level.parse().unwrap(), f).unwrap();
    pguess_bound(&p, &SolverConfig::default()).unwrap()
}

fn bound(scenario: &Scenario, target: &Target, c: &Constraint, level: &str, f: Formulation) -> PguessReport {
    let r = solve_level(scenario, target, c, level, f);
    assert!(r.converged, "{r:?}");
    r
}

/// Extremal behaviors admit no strictly feasible moment matrix, which
/// limits interior-point accuracy; such solves may end near-optimal.
/// Values there move like the square root of the residuals.
const BOUNDARY_TOL: f64 = 2e-3;

fn boundary_bound(scenario: &Scenario, target: &Target, c: &Constraint, level: &str, f: Formulation) -> PguessReport {
    let r = solve_level(scenario, target, c, level, f);
    assert!(matches!(r.status, Status::Optimal | Status::NearOptimal), "{r:?}");
    r
}

fn chsh_value(s: f64) -> Constraint {
    Constraint::Functional {
        functional: functionals::chsh(),
        value: s,
    }
}

fn ghz_behavior(alpha: f64) -> Behavior {
    let state = broadcast_apply(&isotropic_state(alpha).unwrap(), &IsometryChannel::copy(), 1).unwrap();
    let f = functionals::broadcast();
    let best = seesaw_optimize(
        &state,
        &f,
        &SeesawConfig {
            restarts: 10,
            ..Default::default()
        },
    )
    .unwrap();
    born_behavior(f.scenario(), &state, &best.settings).unwrap()
}

#[test]
fn unconstrained_adversary_guesses_perfectly() {
    let s = Scenario::chsh();
    for f in [Formulation::Blocked, Formulation::Direct] {
        let r = bound(&s, &Target::two_party(0, 0), &Constraint::None, "2", f);
        assert!((r.bound - 1.0).abs() < 1e-7, "{f:?}: {}", r.bound);
    }
}

#[test]
fn local_chsh_value_gives_no_randomness() {
    let r = bound(
        &Scenario::chsh(),
        &Target::two_party(0, 0),
        &chsh_value(2.0),
        "1+AB",
        Formulation::Blocked,
    );
    assert!((r.bound - 1.0).abs() < 1e-6, "{}", r.bound);
    assert!(r.h_min < 1e-6);
}

#[test]
fn one_party_chsh_curve() {
    // Closed form for one party's outcome at CHSH value S:
    // p = 1/2 + 1/2·sqrt(2 − S²/4).
    let want = |s: f64| 0.5 + 0.5 * (2.0 - s * s / 4.0).max(0.0).sqrt();
    for s in [2.2, 2.5, 2.7] {
        let r = bound(
            &Scenario::chsh(),
            &Target::one_party(0),
            &chsh_value(s),
            "1+AB",
            Formulation::Blocked,
        );
        assert!((r.bound - want(s)).abs() < 1e-5, "S={s}: {} vs {}", r.bound, want(s));
    }
    let s = 2.0 * 2f64.sqrt();
    let r = boundary_bound(
        &Scenario::chsh(),
        &Target::one_party(0),
        &chsh_value(s),
        "1+AB",
        Formulation::Blocked,
    );
    assert!((r.bound - 0.5).abs() < BOUNDARY_TOL, "{}", r.bound);
}

#[test]
fn tsirelson_point_in_both_formulations() {
    let s = 2.0 * 2f64.sqrt();
    let direct = boundary_bound(
        &Scenario::chsh(),
        &Target::one_party(0),
        &chsh_value(s),
        "2",
        Formulation::Direct,
    );
    assert!((direct.bound - 0.5).abs() < BOUNDARY_TOL, "{}", direct.bound);
    // Self-testing fixes p(a,b|0,0), so Eve learns nothing beyond its maximum.
    let two = boundary_bound(
        &Scenario::chsh(),
        &Target::two_party(0, 0),
        &chsh_value(s),
        "1+AB",
        Formulation::Blocked,
    );
    let want = (2.0 + 2f64.sqrt()) / 8.0;
    assert!((two.bound - want).abs() < BOUNDARY_TOL, "{} vs {want}", two.bound);
}

#[test]
fn broadcast_local_mixtures_are_not_random() {
    let set = broadcast_local_vertices(&Scenario::broadcast()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let parts: Vec<(f64, Behavior)> = (0..5)
            .map(|_| (rng.random_range(0.1..1.0), set.behavior(rng.random_range(0..set.len()))))
            .collect();
        let total: f64 = parts.iter().map(|p| p.0).sum();
        let refs: Vec<(f64, &Behavior)> = parts.iter().map(|(w, b)| (w / total, b)).collect();
        let b = Behavior::combine(&refs).unwrap();
        let r = bound(
            b.scenario(),
            &Target::two_party(0, 0),
            &Constraint::Behavior(b.clone()),
            "1",
            Formulation::Blocked,
        );
        assert!(r.bound >= 1.0 - 1e-6, "{}", r.bound);
    }
}

#[test]
fn supra_quantum_data_certify_nothing() {
    // Alice deterministic, a PR box between the Bobs.
    let b = Behavior::from_fn(Scenario::broadcast(), |x, a| {
        let pr = (a[1] ^ a[2]) == (x[1] & x[2]);
        if a[0] == 0 && pr {
            0.5
        } else {
            0.0
        }
    });
    let r = solve_level(
        b.scenario(),
        &Target::two_party(0, 0),
        &Constraint::Behavior(b.clone()),
        "local",
        Formulation::Blocked,
    );
    assert_eq!(r.status, Status::Unbounded);
    assert!(!r.converged);
    assert_eq!((r.bound, r.h_min), (1.0, 0.0));
}

#[test]
fn levels_are_ordered_and_full_statistics_help() {
    let b = ghz_behavior(0.9);
    let c = Constraint::Behavior(b.clone());
    let t = Target::two_party(0, 0);
    let bounds: Vec<f64> = ["1", "1+AB", "2"]
        .iter()
        .map(|l| bound(b.scenario(), &t, &c, l, Formulation::Blocked).bound)
        .collect();
    assert!(
        bounds[1] <= bounds[0] + 1e-7 && bounds[2] <= bounds[1] + 1e-7,
        "{bounds:?}"
    );
    assert!(bounds[2] < 1.0 - 1e-3, "{bounds:?}");
    // Full statistics constrain at least as much as the functional value.
    let f = functionals::broadcast();
    let value = f.eval(&b).unwrap();
    let ineq = bound(
        b.scenario(),
        &t,
        &Constraint::Functional { functional: f, value },
        "1+AB",
        Formulation::Blocked,
    );
    assert!(bounds[1] <= ineq.bound + 1e-6, "{} vs {}", bounds[1], ineq.bound);
}

#[test]
fn three_party_target_needs_triple_products() {
    let b = ghz_behavior(1.0);
    let c = Constraint::Behavior(b.clone());
    let err = assemble_sdp(
        b.scenario(),
        &Target::three_party(0, 0, 0),
        &c,
        &Level::length(1),
        Formulation::Blocked,
    );
    assert!(matches!(err, Err(Error::Validation(_))));
    let r = bound(
        b.scenario(),
        &Target::three_party(0, 0, 0),
        &c,
        "1+ABC",
        Formulation::Blocked,
    );
    assert!(r.bound < 1.0 - 1e-3 && r.bound >= 0.125 - 1e-7, "{}", r.bound);
}

#[test]
fn observed_constraints_ignore_eve_words() {
    let b = ghz_behavior(0.9);
    let c = Constraint::Behavior(b.clone());
    let t = Target::one_party(0);
    let plain = assemble_sdp(b.scenario(), &t, &c, &"2".parse().unwrap(), Formulation::Direct).unwrap();
    let more = assemble_sdp(b.scenario(), &t, &c, &"2+ABE".parse().unwrap(), Formulation::Direct).unwrap();
    assert!(more.monomials.len() > plain.monomials.len());
    assert_eq!(plain.constraints, more.constraints);
    let eve = b.scenario().num_parties();
    assert!(plain
        .constraints
        .iter()
        .all(|c| c.terms.iter().all(|(w, _)| !w.touches(eve))));
}

#[test]
fn equivalent_entries_share_variables() {
    let alg = Algebra::from_scenario(&Scenario::broadcast());
    let p = assemble_sdp(
        &Scenario::broadcast(),
        &Target::two_party(0, 0),
        &Constraint::None,
        &Level::length(2),
        Formulation::Blocked,
    )
    .unwrap();
    let n = p.monomials.len();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let (i, j, k, l) = (
            rng.random_range(0..n),
            rng.random_range(0..n),
            rng.random_range(0..n),
            rng.random_range(0..n),
        );
        let w1 = p.monomials[i].adjoint().mul(&p.monomials[j]);
        let w2 = p.monomials[k].adjoint().mul(&p.monomials[l]);
        if w1.moment_key() == w2.moment_key() {
            assert_eq!(
                p.index[i][j],
                p.index[k][l],
                "{} {}",
                alg.display(&w1),
                alg.display(&w2)
            );
        } else {
            assert_ne!(p.index[i][j], p.index[k][l]);
        }
    }
}

#[test]
fn quantum_behaviors_are_feasible_and_sandwiched() {
    for alpha in [0.3, 0.7] {
        let b = ghz_behavior(alpha);
        let r = bound(
            b.scenario(),
            &Target::two_party(0, 0),
            &Constraint::Behavior(b.clone()),
            "1",
            Formulation::Blocked,
        );
        // Eve can always guess the most likely outcome pair.
        let best = (0..4)
            .map(|k| b.prob(&[0, 0, 0], &[k / 2, k % 2, 0]) + b.prob(&[0, 0, 0], &[k / 2, k % 2, 1]))
            .fold(0.0, f64::max);
        assert!(r.bound >= best - 1e-7 && r.bound <= 1.0 + 1e-7);
        assert!(r.ns_residual < 1e-12);
    }
}
