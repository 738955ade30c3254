//! Acceptance suite. Runs every criterion, prints one line each and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use netrand::behavior::{born_behavior, Behavior, Scenario};
use netrand::functionals::{self, functional_to_game, seesaw_optimize, CorrelatorFunctional, SeesawConfig};
use netrand::locality::{broadcast_local_vertices, deterministic_vertices, local_bound};
use netrand::npa::{assemble_sdp, pguess_bound, Constraint, Formulation, Level, PguessReport, Target};
use netrand::quantum::{broadcast_apply, isotropic_state, partial_transpose_min_eig, IsometryChannel, QuantumState};
use netrand::randomness::{
    binary_entropy, eat_rate, leftover_epsilon, max_output_length, net_randomness, parse_bits, simulate_protocol,
    toeplitz_extract, BehaviorSampler, RateParams, TradeoffFunction,
};
use netrand::sdp::{SolverConfig, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// H_min of the isotropic(0.68) behavior at level `local`, full statistics.
const GOLDEN_H_068: f64 = 0.147062;
const GOLDEN_TOL: f64 = 1e-5;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn broadcast_state(alpha: f64) -> QuantumState {
    broadcast_apply(&isotropic_state(alpha).unwrap(), &IsometryChannel::copy(), 1).unwrap()
}

/// Born-rule behavior with see-saw settings for the broadcast functional.
fn seesaw_behavior(alpha: f64) -> (Behavior, f64) {
    let state = broadcast_state(alpha);
    let f = functionals::broadcast();
    let best = seesaw_optimize(&state, &f, &SeesawConfig::default()).unwrap();
    (born_behavior(f.scenario(), &state, &best.settings).unwrap(), best.value)
}

fn solve(b: &Behavior, constraint: Constraint, level: &str) -> PguessReport {
    let level: Level = level.parse().unwrap();
    let p = assemble_sdp(
        b.scenario(),
        &Target::two_party(0, 0),
        &constraint,
        &level,
        Formulation::Blocked,
    )
    .unwrap();
    pguess_bound(&p, &SolverConfig::default()).unwrap()
}

fn inequality(b: &Behavior) -> Constraint {
    let functional = functionals::broadcast();
    let value = functional.eval(b).unwrap();
    Constraint::Functional { functional, value }
}

fn criterion_1() -> Outcome {
    let set = broadcast_local_vertices(&Scenario::broadcast()).unwrap();
    let bound = local_bound(&functionals::broadcast(), &set).unwrap();
    outcome(
        set.len() == 192 && (bound - 4.0).abs() <= 1e-12,
        format!("{} vertices, local bound {bound}", set.len()),
    )
}

fn criterion_2() -> Outcome {
    let f = functionals::broadcast();
    let config = SeesawConfig::default();
    let mut last_local = None;
    let mut first_violating = None;
    for k in 0..=100 {
        let alpha = k as f64 / 100.0;
        let value = seesaw_optimize(&broadcast_state(alpha), &f, &config).unwrap().value;
        if value <= 4.0 {
            last_local = Some(alpha);
        } else if first_violating.is_none() {
            first_violating = Some(alpha);
        }
    }
    let threshold = 1.0 / 3f64.sqrt();
    match (last_local, first_violating) {
        (Some(lo), Some(hi)) => outcome(
            lo < threshold && threshold < hi && hi - lo < 0.0100001,
            format!("largest alpha with I <= 4: {lo}, smallest with I > 4: {hi}, 1/sqrt(3) = {threshold:.4}"),
        ),
        _ => outcome(false, format!("no bracket: {last_local:?} {first_violating:?}")),
    }
}

fn criterion_3() -> Outcome {
    let f = functionals::chsh();
    let value = seesaw_optimize(&isotropic_state(1.0).unwrap(), &f, &SeesawConfig::default())
        .unwrap()
        .value;
    let bound = local_bound(&f, &deterministic_vertices(f.scenario())).unwrap();
    let tsirelson = 2.0 * 2f64.sqrt();
    outcome(
        (value - tsirelson).abs() <= 1e-6 && bound == 2.0,
        format!("see-saw {value:.9} vs 2*sqrt(2) = {tsirelson:.9}, local bound {bound}"),
    )
}

fn criterion_4() -> Outcome {
    let eig = |a: f64| partial_transpose_min_eig(&isotropic_state(a).unwrap(), &[0]).unwrap();
    let (mut lo, mut hi) = (0.0, 1.0);
    if !(eig(lo) >= 0.0 && eig(hi) < 0.0) {
        return outcome(false, "no sign change on [0, 1]");
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if eig(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    outcome((root - 1.0 / 3.0).abs() <= 1e-9, format!("sign change at {root:.12}"))
}

fn criterion_5() -> Outcome {
    let set = broadcast_local_vertices(&Scenario::broadcast()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::INFINITY;
    let mut outside = 0;
    let mut failures = Vec::new();
    for trial in 0..20 {
        let k = rng.random_range(2..=12);
        let parts: Vec<(f64, Behavior)> = (0..k)
            .map(|_| (rng.random::<f64>() + 1e-3, set.behavior(rng.random_range(0..set.len()))))
            .collect();
        let total: f64 = parts.iter().map(|p| p.0).sum();
        let refs: Vec<(f64, &Behavior)> = parts.iter().map(|(w, b)| (w / total, b)).collect();
        let b = Behavior::combine(&refs).unwrap();
        let r = solve(&b, Constraint::Behavior(b.clone()), "local");
        worst = worst.min(r.bound);
        if r.status == Status::Unbounded {
            outside += 1;
        }
        let sound = r.converged || r.status == Status::Unbounded;
        if !(sound && r.bound >= 1.0 - 1e-6 && r.h_min <= 1e-6) {
            failures.push(format!("#{trial}: {} ({:?})", r.bound, r.status));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "20 mixtures ({outside} outside the relaxed quantum set), smallest p_guess {worst:.9}{}",
            failures_suffix(&failures)
        ),
    )
}

fn failures_suffix(failures: &[String]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        format!("; failing {}", failures.join(", "))
    }
}

fn criterion_6() -> Outcome {
    let (b, value) = seesaw_behavior(0.68);
    let r = solve(&b, Constraint::Behavior(b.clone()), "local");
    outcome(
        r.converged && r.h_min > 0.01 && (r.h_min - GOLDEN_H_068).abs() <= GOLDEN_TOL,
        format!(
            "I = {value:.6}, H_min = {:.6} (golden {GOLDEN_H_068}), status {:?}",
            r.h_min, r.status
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for alpha in [0.8, 0.9, 1.0] {
        let (b, _) = seesaw_behavior(alpha);
        let full = solve(&b, Constraint::Behavior(b.clone()), "local");
        let ineq = solve(&b, inequality(&b), "local");
        passed &= full.h_min >= ineq.h_min - 1e-6;
        parts.push(format!(
            "alpha {alpha}: full {:.6} ({:?}) vs inequality {:.6} ({:?})",
            full.h_min, full.status, ineq.h_min, ineq.status
        ));
    }
    outcome(passed, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let (ideal, _) = seesaw_behavior(1.0);
    let uniform = Behavior::uniform(Scenario::broadcast());
    let behaviors = [
        seesaw_behavior(0.7).0,
        seesaw_behavior(0.8).0,
        seesaw_behavior(0.9).0,
        ideal.mix(&uniform, 0.9).unwrap(),
        ideal.mix(&uniform, 0.95).unwrap(),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (i, b) in behaviors.iter().enumerate() {
        let reports: Vec<PguessReport> = ["1", "1+AB", "2"]
            .iter()
            .map(|l| solve(b, Constraint::Behavior(b.clone()), l))
            .collect();
        let v: Vec<f64> = reports.iter().map(|r| r.bound).collect();
        let ok = reports.iter().all(|r| r.converged) && v[1] <= v[0] + 1e-7 && v[2] <= v[1] + 1e-7;
        passed &= ok;
        parts.push(format!("#{i} [{:.7}, {:.7}, {:.7}]", v[0], v[1], v[2]));
    }
    outcome(passed, parts.join(" "))
}

fn criterion_9() -> Outcome {
    let kat = [
        ("1011", "10110", "11"),
        ("0100", "10110", "10"),
        ("0000", "10110", "00"),
    ];
    let mut passed = true;
    for (input, seed, want) in kat {
        let got = toeplitz_extract(&parse_bits(input).unwrap(), &parse_bits(seed).unwrap(), 2).unwrap();
        passed &= got == parse_bits(want).unwrap();
    }
    let (m, ell, trials) = (12usize, 6usize, 100_000usize);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut collisions = 0usize;
    for _ in 0..trials {
        let u: Vec<bool> = (0..m).map(|_| rng.random()).collect();
        let mut v: Vec<bool> = (0..m).map(|_| rng.random()).collect();
        while v == u {
            v = (0..m).map(|_| rng.random()).collect();
        }
        let s: Vec<bool> = (0..m + ell - 1).map(|_| rng.random()).collect();
        if toeplitz_extract(&u, &s, ell).unwrap() == toeplitz_extract(&v, &s, ell).unwrap() {
            collisions += 1;
        }
    }
    let p = 2f64.powi(-(ell as i32));
    let limit = p + 5.0 * (p * (1.0 - p) / trials as f64).sqrt();
    let rate = collisions as f64 / trials as f64;
    passed &= rate <= limit;
    outcome(
        passed,
        format!("known answers ok: {passed}; collision rate {rate:.6} <= {limit:.6}"),
    )
}

fn criterion_10() -> Outcome {
    // ℓ − n(H_bin(γ) + 3γ) + 2 with H_bin(1/4) = 2 − (3/4)·log₂3.
    let hb = 2.0 - 0.75 * 3f64.log2();
    let hand = [
        (net_randomness(1000.0, 100, 0.25), 1000.0 - 100.0 * (hb + 0.75) + 2.0),
        (net_randomness(0.0, 7, 1.0), -19.0),
        (net_randomness(64.0, 32, 0.5), 64.0 - 32.0 * 2.5 + 2.0),
    ];
    let mut passed = hand.iter().all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
    passed &= (binary_entropy(0.25) - hb).abs() < 1e-15;
    passed &= leftover_epsilon(10.0, 10.0, 0.25) == 1.5;

    // CHSH tradeoff in closed form at ω = 0.8.
    let h = |omega: f64| {
        let s = 8.0 * omega - 4.0;
        Ok(-(0.5 + 0.5 * (2.0 - s * s / 4.0).max(0.0).sqrt()).log2())
    };
    let tradeoff = TradeoffFunction::new(h, (0.0, 1.0));
    let params = RateParams {
        n: 1_000_000_000,
        gamma: 1e-12,
        omega_exp: 0.8,
        ..Default::default()
    };
    let r = eat_rate(&params, &tradeoff).unwrap();
    let h_exp = h(0.8).unwrap();
    passed &= (r.rate_per_round - h_exp).abs() <= 1e-6;
    let ell = max_output_length(r.h_total, params.eps_h, params.eps_r).unwrap();
    passed &= r.ell_max == Some(ell);
    outcome(
        passed,
        format!(
            "hand substitutions ok; rate per round {:.9} vs h(0.8) = {h_exp:.9}",
            r.rate_per_round
        ),
    )
}

fn abort_fraction(functional: &CorrelatorFunctional, omega: f64, params: &RateParams, runs: u64) -> f64 {
    let game = functional_to_game(functional).unwrap();
    let sampler = BehaviorSampler::with_score(&game, omega).unwrap();
    let aborted = (0..runs)
        .filter(|&seed| simulate_protocol(&sampler, params, &game, 1000 + seed).unwrap().aborted)
        .count();
    aborted as f64 / runs as f64
}

fn criterion_11() -> Outcome {
    let params = RateParams {
        n: 100_000,
        gamma: 0.05,
        omega_exp: 0.75,
        delta: 0.05,
        ..Default::default()
    };
    let f = functionals::broadcast();
    let honest = abort_fraction(&f, params.omega_exp + params.delta, &params, 100);
    let adversarial = abort_fraction(&f, params.omega_exp - 2.0 * params.delta, &params, 100);
    outcome(
        honest < 0.01 && adversarial > 0.99,
        format!("honest abort rate {honest}, adversarial abort rate {adversarial}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("broadcast local bound", criterion_1),
        ("activation threshold", criterion_2),
        ("CHSH consistency", criterion_3),
        ("entanglement window", criterion_4),
        ("soundness on broadcast-local behaviors", criterion_5),
        ("certified randomness at alpha 0.68", criterion_6),
        ("full statistics beat the inequality", criterion_7),
        ("hierarchy monotonicity", criterion_8),
        ("Toeplitz extractor", criterion_9),
        ("rates", criterion_10),
        ("abort calibration", criterion_11),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let elapsed: Duration = start.elapsed();
        println!(
            "criterion {n:>2} {}: {name}: {} [{:.1} s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
        if !o.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
