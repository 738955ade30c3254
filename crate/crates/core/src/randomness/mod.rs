//! Min-entropy, protocol simulation, Toeplitz extraction and rates.

mod protocol;
mod rates;
mod toeplitz;

pub use protocol::{
    read_transcript_csv, simulate_protocol, write_transcript_csv, BehaviorSampler, OutcomeSampler, Round, Transcript,
};
pub use rates::{
    binary_entropy, eat_rate, leftover_epsilon, max_output_length, net_randomness, soundness_epsilon, RateParams,
    RateReport, TradeoffFunction, ASYMPTOTIC_WARNING,
};
pub use toeplitz::{bits_to_bytes, bytes_to_bits, format_bits, parse_bits, to_hex, toeplitz_extract};

use crate::functionals::{functional_to_game, CorrelatorFunctional};
use crate::npa::{assemble_sdp, pguess_bound, Constraint, Formulation, Level, Target};
use crate::sdp::SolverConfig;
use crate::{Error, Result};

/// `H_min = −log₂ p` for a guessing probability `p ∈ (0, 1]`.
pub fn min_entropy_from_pguess(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain {
            name: "guessing probability",
            value: p,
        });
    }
    // Written as a difference so that p = 1 gives +0.
    Ok(0.0 - p.log2())
}

/// Per-round min-entropy as a function of the winning probability of the
/// game built from `functional`, each value a certified relaxation bound.
///
/// Min-entropy never exceeds the von Neumann entropy, so this is a valid
/// but conservative choice of `h`.
pub fn npa_tradeoff(
    functional: CorrelatorFunctional,
    target: Target,
    level: Level,
    config: SolverConfig,
) -> Result<TradeoffFunction> {
    let game = functional_to_game(&functional)?;
    Ok(TradeoffFunction::new(
        move |omega| {
            let constraint = Constraint::Functional {
                functional: functional.clone(),
                value: game.value_from_omega(omega),
            };
            let problem = assemble_sdp(
                functional.scenario(),
                &target,
                &constraint,
                &level,
                Formulation::Blocked,
            )?;
            let bound = pguess_bound(&problem, &config)?.certified()?;
            min_entropy_from_pguess(bound.clamp(f64::MIN_POSITIVE, 1.0))
        },
        (0.0, 1.0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::chsh;

    #[test]
    fn min_entropy_values() {
        assert_eq!(min_entropy_from_pguess(1.0).unwrap(), 0.0);
        assert_eq!(min_entropy_from_pguess(0.25).unwrap(), 2.0);
        for k in 1..=20 {
            assert_eq!(min_entropy_from_pguess(2f64.powi(-k)).unwrap(), k as f64);
        }
        for p in [0.0, -0.1, 1.0 + 1e-12, f64::NAN] {
            assert!(min_entropy_from_pguess(p).is_err());
        }
    }

    #[test]
    fn individual_attacks_scale_with_rounds() {
        // No correction and negligible testing: the total is n times one round.
        let h = min_entropy_from_pguess(0.3).unwrap();
        let p = RateParams {
            n: 12_345,
            gamma: 1e-300,
            ..Default::default()
        };
        let r = eat_rate(&p, &TradeoffFunction::constant(h)).unwrap();
        assert_eq!(r.h_total, p.n as f64 * h);
    }

    #[test]
    fn chsh_tradeoff_matches_closed_form() {
        let f = npa_tradeoff(
            chsh(),
            Target::one_party(0),
            "1+AB".parse().unwrap(),
            SolverConfig::default(),
        )
        .unwrap();
        // ω = 0.8 means S = 2.4.
        let s: f64 = 2.4;
        let want = -(0.5 + 0.5 * (2.0 - s * s / 4.0).sqrt()).log2();
        assert!((f.eval(0.8).unwrap() - want).abs() < 1e-5);
        assert!(f.eval(0.7).unwrap() < 1e-6);
    }
}
