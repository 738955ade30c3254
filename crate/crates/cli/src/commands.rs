//! Subcommand implementations.

use std::path::Path;

use netrand::behavior::{
    born_behavior, read_behavior_csv, write_behavior_csv, Behavior, MeasurementSettings, Scenario,
};
use netrand::functionals::{
    self, functional_to_game, seesaw_optimize, seesaw_value, CorrelatorFunctional, SeesawConfig,
};
use netrand::locality::{broadcast_local_vertices, membership_lp, write_certificate_csv, LpStatus};
use netrand::npa::{assemble_sdp, pguess_bound_with, Constraint, PguessReport, Target};
use netrand::quantum::{broadcast_apply, isotropic_state, IsometryChannel};
use netrand::randomness::{
    bits_to_bytes, bytes_to_bits, eat_rate, npa_tradeoff, read_transcript_csv, simulate_protocol, to_hex,
    toeplitz_extract, write_transcript_csv, BehaviorSampler, RateParams, TradeoffFunction,
};
use netrand::sdp::{emit_sdpa, SolverBackend, SolverConfig, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConstraintKind, EntropySpec, FunctionalName, RunConfig, SamplerSpec, ScenarioName};
use crate::error::CliError;
use crate::output::Outputs;

fn scenario(cfg: &RunConfig) -> Scenario {
    match cfg.scenario {
        ScenarioName::Broadcast => Scenario::broadcast(),
        ScenarioName::Chsh => Scenario::chsh(),
    }
}

fn functional(name: FunctionalName) -> CorrelatorFunctional {
    match name {
        FunctionalName::Broadcast => functionals::broadcast(),
        FunctionalName::Chsh => functionals::chsh(),
    }
}

fn target(cfg: &RunConfig, s: &Scenario) -> Result<Target, CliError> {
    let names = cfg
        .target
        .clone()
        .unwrap_or_else(|| s.parties().iter().take(2).map(|p| p.name.clone()).collect());
    let mut parties = names
        .iter()
        .map(|n| {
            s.party_index(n)
                .ok_or_else(|| CliError::Config(format!("target: unknown party `{n}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let inputs = cfg.target_inputs.clone().unwrap_or_else(|| vec![0; parties.len()]);
    if inputs.len() != parties.len() {
        return Err(CliError::Config("target_inputs: one input per target party".into()));
    }
    let mut pairs: Vec<(usize, usize)> = parties.iter().copied().zip(inputs).collect();
    pairs.sort_unstable();
    parties = pairs.iter().map(|p| p.0).collect();
    Ok(Target::new(parties, pairs.iter().map(|p| p.1).collect()))
}

fn backend() -> Result<SolverBackend, CliError> {
    SolverBackend::from_env().map_err(|e| CliError::Config(e.to_string()))
}

fn require_broadcast(cfg: &RunConfig, what: &str) -> Result<(), CliError> {
    if cfg.scenario == ScenarioName::Broadcast {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} needs the broadcast scenario")))
    }
}

/// Born-rule behavior of the broadcast isotropic state, with explicit or
/// see-saw settings, and its broadcast functional value.
fn behavior_at(cfg: &RunConfig, alpha: f64) -> Result<(Behavior, f64), CliError> {
    let f = functionals::broadcast();
    let state = broadcast_apply(&isotropic_state(alpha)?, &IsometryChannel::copy(), 1)?;
    let settings = match &cfg.settings {
        Some(parties) => MeasurementSettings::new(parties.clone()),
        None => {
            let sc = SeesawConfig {
                restarts: cfg.seesaw.restarts,
                tol: cfg.seesaw.tol,
                max_sweeps: cfg.seesaw.max_sweeps,
                seed: cfg.seed,
            };
            seesaw_optimize(&state, &f, &sc)?.settings
        }
    };
    let value = seesaw_value(&state, &f, &settings)?;
    Ok((born_behavior(f.scenario(), &state, &settings)?, value))
}

fn read_behavior(s: &Scenario, path: &Path) -> Result<Behavior, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    read_behavior_csv(s, file).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn source_behavior(cfg: &RunConfig, file: Option<&Path>, alpha: Option<f64>) -> Result<Behavior, CliError> {
    match (file, alpha) {
        (Some(p), _) => read_behavior(&scenario(cfg), p),
        (None, Some(a)) => {
            require_broadcast(cfg, "a behavior from `alpha`")?;
            Ok(behavior_at(cfg, a)?.0)
        }
        (None, None) => Err(CliError::Config("set `behavior` or `alpha`".into())),
    }
}

/// Largest CHSH value among the bipartite marginals of Alice with each Bob,
/// over Alice's input pairs and all relabelings.
pub fn best_chsh(b: &Behavior) -> f64 {
    let s = b.scenario();
    let mut best = f64::NEG_INFINITY;
    for bob in 1..s.num_parties() {
        if s.party(bob).inputs < 2 {
            continue;
        }
        for x0 in 0..s.party(0).inputs {
            for x1 in x0 + 1..s.party(0).inputs {
                let e = |x, y| b.correlator(&[(0, x), (bob, y)]);
                let terms = [e(x0, 0), e(x0, 1), e(x1, 0), e(x1, 1)];
                for minus in 0..4 {
                    for sign in [1.0, -1.0] {
                        let v: f64 = terms
                            .iter()
                            .enumerate()
                            .map(|(i, t)| if i == minus { -t } else { *t })
                            .sum();
                        best = best.max(sign * v);
                    }
                }
            }
        }
    }
    best
}

fn status_name(s: Status) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

struct SweepRow {
    alpha: f64,
    value: Option<f64>,
    chsh: Option<f64>,
    inequality: Option<PguessReport>,
    full: Option<PguessReport>,
    errors: Vec<String>,
}

fn sweep_row(cfg: &RunConfig, t: &Target, solver: &SolverConfig, backend: &SolverBackend, alpha: f64) -> SweepRow {
    let mut row = SweepRow {
        alpha,
        value: None,
        chsh: None,
        inequality: None,
        full: None,
        errors: Vec::new(),
    };
    let (b, value) = match behavior_at(cfg, alpha) {
        Ok(r) => r,
        Err(e) => {
            row.errors.push(e.to_string());
            return row;
        }
    };
    row.value = Some(value);
    row.chsh = Some(best_chsh(&b));
    let f = functionals::broadcast();
    let solve = |c: Constraint| -> netrand::Result<PguessReport> {
        let p = assemble_sdp(b.scenario(), t, &c, &cfg.level, cfg.formulation.into())?;
        pguess_bound_with(&p, solver, backend)
    };
    match solve(Constraint::Functional { functional: f, value }) {
        Ok(r) => row.inequality = Some(r),
        Err(e) => row.errors.push(format!("inequality: {e}")),
    }
    match solve(Constraint::Behavior(b.clone())) {
        Ok(r) => row.full = Some(r),
        Err(e) => row.errors.push(format!("full: {e}")),
    }
    row
}

pub const SWEEP_HEADER: [&str; 10] = [
    "alpha",
    "broadcast_value",
    "chsh_value",
    "pguess_inequality",
    "h_min_inequality",
    "status_inequality",
    "pguess_full",
    "h_min_full",
    "status_full",
    "error",
];

pub fn sweep(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    require_broadcast(cfg, "sweep")?;
    let alphas = cfg.alphas.values()?;
    let t = target(cfg, &scenario(cfg))?;
    let solver: SolverConfig = cfg.solver.into();
    let backend = backend()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("jobs: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        alphas
            .par_iter()
            .map(|&a| sweep_row(cfg, &t, &solver, &backend, a))
            .collect()
    });

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).map_err(|e| CliError::Io(e.to_string()))?;
    let mut failed = 0;
    for r in &rows {
        let cols = |rep: &Option<PguessReport>| match rep {
            Some(r) => [r.bound.to_string(), r.h_min.to_string(), status_name(r.status)],
            None => Default::default(),
        };
        let [pi, hi, si] = cols(&r.inequality);
        let [pf, hf, sf] = cols(&r.full);
        if !r.errors.is_empty() {
            failed += 1;
        }
        w.write_record([
            r.alpha.to_string(),
            fmt_opt(r.value),
            fmt_opt(r.chsh),
            pi,
            hi,
            si,
            pf,
            hf,
            sf,
            r.errors.join("; "),
        ])
        .map_err(|e| CliError::Io(e.to_string()))?;
        println!(
            "alpha {:<6} I {:<10} H_ineq {:<10} H_full {}",
            r.alpha,
            r.value.map_or("-".into(), |v| format!("{v:.6}")),
            r.inequality.as_ref().map_or("-".into(), |x| format!("{:.6}", x.h_min)),
            r.full.as_ref().map_or("-".into(), |x| format!("{:.6}", x.h_min)),
        );
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    out.write("sweep.csv", &bytes)?;
    if failed > 0 {
        out.warn(format!("{failed} sweep rows recorded errors"));
    }
    Ok(())
}

#[derive(Serialize)]
struct CertifyReport {
    behavior: String,
    level: String,
    target: Target,
    normalization: f64,
    negativity: f64,
    no_signaling: f64,
    result: PguessReport,
}

pub fn certify(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let path = cfg
        .certify
        .behavior
        .as_deref()
        .ok_or_else(|| CliError::Config("certify.behavior is required".into()))?;
    let s = scenario(cfg);
    let b = read_behavior(&s, path)?;
    let v = b.validate(cfg.certify.tol);
    if !v.passed() {
        return Err(CliError::Validation(format!(
            "{}: normalization {:.3e}, negativity {:.3e}, signaling {:.3e} exceed tolerance {:.1e}",
            path.display(),
            v.normalization,
            v.negativity,
            v.no_signaling,
            cfg.certify.tol
        )));
    }
    let t = target(cfg, &s)?;
    let problem = assemble_sdp(&s, &t, &Constraint::Behavior(b), &cfg.level, cfg.formulation.into())?;
    let result = pguess_bound_with(&problem, &cfg.solver.into(), &backend()?)?;
    println!(
        "p_guess <= {:.9}  H_min >= {:.9} bits  status {}  ns residual {:.2e}",
        result.bound,
        result.h_min,
        status_name(result.status),
        result.ns_residual
    );
    if result.status == Status::Unbounded {
        out.warn(format!(
            "{}: no moment matrix at level {} reproduces this behavior; nothing certified",
            path.display(),
            cfg.level
        ));
    }
    let converged = result.converged;
    let status = result.status;
    out.write_json(
        "certify.json",
        &CertifyReport {
            behavior: path.display().to_string(),
            level: cfg.level.to_string(),
            target: t,
            normalization: v.normalization,
            negativity: v.negativity,
            no_signaling: v.no_signaling,
            result,
        },
    )?;
    if converged {
        Ok(())
    } else if status == Status::Unbounded {
        Err(CliError::Validation(
            "behavior lies outside the relaxed quantum set".into(),
        ))
    } else {
        Err(CliError::Numeric(format!(
            "solver finished with status {}",
            status_name(status)
        )))
    }
}

#[derive(Serialize)]
struct LocalityReport {
    verdict: &'static str,
    slack: f64,
    iterations: usize,
    broadcast_value: f64,
    certificate_bound: Option<f64>,
    certificate_value: Option<f64>,
    violation: Option<f64>,
}

pub fn locality(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    require_broadcast(cfg, "locality")?;
    let b = source_behavior(cfg, cfg.locality.behavior.as_deref(), cfg.locality.alpha)?;
    let mut buf = Vec::new();
    write_behavior_csv(&b, &mut buf)?;
    out.write("behavior.csv", &buf)?;
    let vertices = broadcast_local_vertices(b.scenario())?;
    let lp = membership_lp(&b, &vertices, cfg.locality.tol)?;
    let broadcast_value = functionals::broadcast().eval(&b)?;
    let mut report = LocalityReport {
        verdict: if lp.is_inside() { "inside" } else { "outside" },
        slack: lp.slack,
        iterations: lp.iterations,
        broadcast_value,
        certificate_bound: None,
        certificate_value: None,
        violation: None,
    };
    match &lp.status {
        LpStatus::Outside(cert) => {
            report.certificate_bound = Some(cert.bound);
            report.certificate_value = Some(cert.value);
            report.violation = Some(cert.violation);
            let mut buf = Vec::new();
            write_certificate_csv(b.scenario(), cert, &mut buf)?;
            out.write("certificate.csv", &buf)?;
        }
        LpStatus::Inside { weights, .. } => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["vertex", "weight"])
                .map_err(|e| CliError::Io(e.to_string()))?;
            for (i, x) in weights.iter().enumerate().filter(|(_, x)| **x > 0.0) {
                w.write_record([i.to_string(), x.to_string()])
                    .map_err(|e| CliError::Io(e.to_string()))?;
            }
            out.write("weights.csv", &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?)?;
        }
    }
    println!(
        "{} (broadcast value {broadcast_value:.6}, slack {:.3e})",
        report.verdict, report.slack
    );
    out.write_json("locality.json", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateReport {
    rounds: u64,
    tests: u64,
    failures: u64,
    threshold: f64,
    aborted: bool,
    win_frequency: f64,
    output_bits: usize,
}

pub fn simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let params: RateParams = cfg.rate.into();
    params.validate()?;
    let f = functional(cfg.simulate.functional);
    let game = functional_to_game(&f)?;
    let sampler = match &cfg.simulate.sampler {
        SamplerSpec::Honest => BehaviorSampler::with_score(&game, params.omega_exp + params.delta)?,
        SamplerSpec::Score(w) => BehaviorSampler::with_score(&game, *w)?,
        SamplerSpec::Alpha(a) => {
            if cfg.simulate.functional != FunctionalName::Broadcast {
                return Err(CliError::Config(
                    "an `alpha` sampler needs the broadcast functional".into(),
                ));
            }
            BehaviorSampler::new(behavior_at(cfg, *a)?.0)?
        }
        SamplerSpec::Behavior(p) => BehaviorSampler::new(read_behavior(game.scenario(), p)?)?,
    };
    let t = simulate_protocol(&sampler, &params, &game, cfg.seed)?;
    let mut buf = Vec::new();
    write_transcript_csv(&t, &mut buf)?;
    out.write("transcript.csv", &buf)?;
    let report = SimulateReport {
        rounds: params.n,
        tests: t.tests,
        failures: t.failures,
        threshold: t.threshold,
        aborted: t.aborted,
        win_frequency: t.win_frequency(),
        output_bits: t.output_bits()?.len(),
    };
    println!(
        "{} test rounds, {} failures (threshold {:.2}): {}",
        t.tests,
        t.failures,
        t.threshold,
        if t.aborted { "abort" } else { "accept" }
    );
    out.write_json("simulate.json", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct ExtractReport {
    input_bits: usize,
    ell: u64,
    seed_bits: usize,
    output_hex: String,
}

pub fn extract(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let path = cfg
        .extract
        .transcript
        .as_deref()
        .ok_or_else(|| CliError::Config("extract.transcript is required".into()))?;
    let params: RateParams = cfg.rate.into();
    let file = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let t = read_transcript_csv(&scenario(cfg), &params, file)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if t.aborted {
        return Err(CliError::Validation(format!(
            "{}: protocol aborted ({} failures > {:.2}); nothing to extract",
            path.display(),
            t.failures,
            t.threshold
        )));
    }
    let input = t.output_bits()?;
    let ell = cfg.extract.ell.unwrap_or(cfg.rate.ell);
    if ell == 0 {
        return Err(CliError::Config(
            "set extract.ell or rate.ell to a positive length".into(),
        ));
    }
    let ell_us = usize::try_from(ell).map_err(|_| CliError::Config("ell too large".into()))?;
    let seed_len = input.len() + ell_us - 1;
    let seed = match &cfg.extract.seed_hex {
        Some(h) => {
            let bytes = hex::decode(h.trim()).map_err(|e| CliError::Config(format!("extract.seed_hex: {e}")))?;
            bytes_to_bits(&bytes, seed_len)
                .map_err(|_| CliError::Config(format!("extract.seed_hex: need at least {seed_len} bits")))?
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..seed_len).map(|_| rng.random::<bool>()).collect()
        }
    };
    if ell_us > input.len() {
        out.warn(format!("ell = {ell} exceeds the {} input bits", input.len()));
    }
    let bits = toeplitz_extract(&input, &seed, ell_us)?;
    let bytes = bits_to_bytes(&bits);
    let hex = to_hex(&bytes);
    out.write("extracted.bin", &bytes)?;
    out.write("extracted.hex", format!("{hex}\n").as_bytes())?;
    out.write(
        "toeplitz_seed.hex",
        format!("{}\n", to_hex(&bits_to_bytes(&seed))).as_bytes(),
    )?;
    println!("{} input bits -> {ell} output bits", input.len());
    out.write_json(
        "extract.json",
        &ExtractReport {
            input_bits: input.len(),
            ell,
            seed_bits: seed_len,
            output_hex: hex,
        },
    )?;
    Ok(())
}

pub const RATE_HEADER: [&str; 7] = ["n", "h_round", "nu", "h_total", "ell_max", "r_net", "rate_per_round"];

pub fn rate(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let base: RateParams = cfg.rate.into();
    base.validate()?;
    let section = &cfg.rate_table;
    let h = match section.h {
        EntropySpec::Bits(b) => b,
        EntropySpec::Source(_) => {
            let f = functional(section.functional);
            let t = target(cfg, f.scenario())?;
            npa_tradeoff(f, t, cfg.level.clone(), cfg.solver.into())?
                .eval(base.omega_exp)
                .map_err(|e| CliError::Numeric(format!("h(omega_exp = {}): {e}", base.omega_exp)))?
        }
    };
    let mut tradeoff = TradeoffFunction::constant(h);
    if section.nu != 0.0 {
        let nu = section.nu;
        tradeoff = tradeoff.with_correction(move |_| nu);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RATE_HEADER).map_err(|e| CliError::Io(e.to_string()))?;
    let mut warning = None;
    for &n in &section.ns {
        let r = eat_rate(&RateParams { n, ..base }, &tradeoff)?;
        warning = warning.or(r.warning.clone());
        w.write_record([
            n.to_string(),
            r.h_round.to_string(),
            r.nu.to_string(),
            r.h_total.to_string(),
            r.ell_max.map(|l| l.to_string()).unwrap_or_default(),
            r.r_net.to_string(),
            r.rate_per_round.to_string(),
        ])
        .map_err(|e| CliError::Io(e.to_string()))?;
        println!("n {n:<12} r_net {:<16} per round {:.9}", r.r_net, r.rate_per_round);
    }
    out.write("rate.csv", &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?)?;
    if let Some(msg) = warning {
        out.warn(msg);
    }
    Ok(())
}

#[derive(Serialize)]
struct ExportReport {
    level: String,
    constraint: ConstraintKind,
    /// Add to the SDPA objective to recover the guessing-probability bound.
    objective_offset: f64,
    constraints: usize,
    block_sizes: Vec<usize>,
}

pub fn export_sdpa(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let s = scenario(cfg);
    let b = source_behavior(cfg, cfg.export.behavior.as_deref(), cfg.export.alpha)?;
    let constraint = match cfg.export.constraint {
        ConstraintKind::Full => Constraint::Behavior(b),
        ConstraintKind::Inequality => {
            require_broadcast(cfg, "an inequality constraint")?;
            let f = functionals::broadcast();
            let value = f.eval(&b)?;
            Constraint::Functional { functional: f, value }
        }
        ConstraintKind::None => Constraint::None,
    };
    let t = target(cfg, &s)?;
    let problem = assemble_sdp(&s, &t, &constraint, &cfg.level, cfg.formulation.into())?;
    out.write("problem.dat-s", emit_sdpa(&problem.program).as_bytes())?;
    let report = ExportReport {
        level: cfg.level.to_string(),
        constraint: cfg.export.constraint,
        objective_offset: problem.objective_offset,
        constraints: problem.program.num_constraints(),
        block_sizes: problem.program.blocks().iter().map(|b| b.size).collect(),
    };
    println!(
        "{} constraints, blocks {:?}, objective offset {}",
        report.constraints, report.block_sizes, report.objective_offset
    );
    out.write_json("export.json", &report)?;
    Ok(())
}
