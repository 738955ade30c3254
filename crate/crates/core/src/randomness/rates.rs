//! Leftover-hash accounting and entropy-accumulation rates.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Protocol parameters for simulation, extraction and rate accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateParams {
    /// Number of rounds.
    pub n: u64,
    /// Probability that a round is a test round.
    pub gamma: f64,
    /// Expected winning probability.
    pub omega_exp: f64,
    pub delta: f64,
    /// Smoothing parameter of the min-entropy.
    pub eps_h: f64,
    /// Target extractor error.
    pub eps_r: f64,
    /// Target soundness error.
    pub eps_s: f64,
    /// Requested output length in bits.
    pub ell: u64,
}

impl Default for RateParams {
    fn default() -> Self {
        Self {
            n: 100_000,
            gamma: 0.05,
            omega_exp: 0.75,
            delta: 0.01,
            eps_h: 1e-10,
            eps_r: 1e-8,
            eps_s: 1e-8,
            ell: 0,
        }
    }
}

fn unit(name: &'static str, value: f64, open_left: bool) -> Result<()> {
    let ok = if open_left {
        value > 0.0 && value <= 1.0
    } else {
        (0.0..=1.0).contains(&value)
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Domain { name, value })
    }
}

impl RateParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain { name: "n", value: 0.0 });
        }
        unit("gamma", self.gamma, true)?;
        unit("omega_exp", self.omega_exp, false)?;
        unit("delta", self.delta, false)?;
        unit("eps_h", self.eps_h, false)?;
        unit("eps_r", self.eps_r, false)?;
        unit("eps_s", self.eps_s, false)
    }

    /// Largest failure count that does not abort is `⌊nγ(1 − ω_exp + δ)⌋`.
    pub fn abort_threshold(&self) -> f64 {
        self.n as f64 * self.gamma * (1.0 - self.omega_exp + self.delta)
    }

    pub fn aborts(&self, failures: u64) -> bool {
        failures as f64 > self.abort_threshold()
    }
}

type EntropyFn = dyn Fn(f64) -> Result<f64> + Send + Sync;
type CorrectionFn = dyn Fn(&RateParams) -> f64 + Send + Sync;

/// Single-round entropy bound `h(ω)` with its domain and the finite-size
/// correction `ν`.
#[derive(Clone)]
pub struct TradeoffFunction {
    h: Arc<EntropyFn>,
    domain: (f64, f64),
    nu: Option<Arc<CorrectionFn>>,
}

impl fmt::Debug for TradeoffFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TradeoffFunction")
            .field("domain", &self.domain)
            .field("corrected", &self.nu.is_some())
            .finish()
    }
}

impl TradeoffFunction {
    pub fn new<F>(h: F, domain: (f64, f64)) -> Self
    where
        F: Fn(f64) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            h: Arc::new(h),
            domain,
            nu: None,
        }
    }

    /// The same entropy for every score.
    pub fn constant(bits: f64) -> Self {
        Self::new(move |_| Ok(bits), (0.0, 1.0))
    }

    /// Step interpolation of sampled `(ω, h)` points.
    ///
    /// Between samples the value of the nearest sample below is used, which
    /// never exceeds a nondecreasing `h`. Fails unless the samples are sorted
    /// by `ω` with nondecreasing `h`.
    pub fn from_samples(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("no tradeoff samples".into()));
        }
        if points.windows(2).any(|w| !(w[0].0 < w[1].0 && w[0].1 <= w[1].1)) {
            return Err(Error::Validation(
                "tradeoff samples must increase in ω with nondecreasing h".into(),
            ));
        }
        let domain = (points[0].0, points[points.len() - 1].0);
        Ok(Self::new(
            move |w| {
                let i = points.partition_point(|p| p.0 <= w);
                Ok(points[i.saturating_sub(1)].1)
            },
            domain,
        ))
    }

    /// Installs the correction `ν`; without one `ν ≡ 0`.
    pub fn with_correction<F>(mut self, nu: F) -> Self
    where
        F: Fn(&RateParams) -> f64 + Send + Sync + 'static,
    {
        self.nu = Some(Arc::new(nu));
        self
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn eval(&self, omega: f64) -> Result<f64> {
        if !(omega >= self.domain.0 && omega <= self.domain.1) {
            return Err(Error::Domain {
                name: "omega_exp",
                value: omega,
            });
        }
        (self.h)(omega)
    }

    pub fn correction(&self, params: &RateParams) -> Result<f64> {
        let nu = self.nu.as_ref().map_or(0.0, |f| f(params));
        if !(nu >= 0.0) {
            return Err(Error::Domain {
                name: "finite-size correction",
                value: nu,
            });
        }
        Ok(nu)
    }

    /// `true` when no finite-size correction is installed.
    pub fn asymptotic_only(&self) -> bool {
        self.nu.is_none()
    }
}

/// `2^{(ℓ − H)/2} + 2ε_h`.
pub fn leftover_epsilon(ell: f64, h_min: f64, eps_h: f64) -> f64 {
    ((ell - h_min) / 2.0).exp2() + 2.0 * eps_h
}

/// Largest `ℓ` with `leftover_epsilon(ℓ, H, ε_h) ≤ ε_R`, if any.
pub fn max_output_length(h_min: f64, eps_h: f64, eps_r: f64) -> Option<u64> {
    let room = eps_r - 2.0 * eps_h;
    if !(room > 0.0) {
        return None;
    }
    let bound = (h_min + 2.0 * room.log2()).floor();
    if !(bound >= 0.0) {
        return None;
    }
    let mut ell = bound as u64;
    while leftover_epsilon(ell as f64, h_min, eps_h) > eps_r {
        ell = ell.checked_sub(1)?;
    }
    Some(ell)
}

/// Combined soundness error: the largest component.
pub fn soundness_epsilon(components: &[f64]) -> Result<f64> {
    components.iter().try_fold(0.0f64, |acc, &e| {
        if e >= 0.0 {
            Ok(acc.max(e))
        } else {
            Err(Error::Domain {
                name: "epsilon component",
                value: e,
            })
        }
    })
}

pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// `ℓ − n(H_bin(γ) + 3γ) + 2`.
pub fn net_randomness(ell: f64, n: u64, gamma: f64) -> f64 {
    ell - n as f64 * (binary_entropy(gamma) + 3.0 * gamma) + 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub n: u64,
    /// Per-round entropy `h(ω_exp)`.
    pub h_round: f64,
    pub nu: f64,
    /// `n·h(ω_exp) − √n·ν`.
    pub h_total: f64,
    /// Longest secure output, absent when none meets the extractor target.
    pub ell_max: Option<u64>,
    /// Net randomness at `ell_max`, or at zero output when there is none.
    pub r_net: f64,
    pub rate_per_round: f64,
    /// Extractor error at the requested output length.
    pub eps_at_requested: f64,
    /// `max{ε_S, leftover error}` at the requested output length.
    pub soundness: f64,
    pub warning: Option<String>,
}

pub const ASYMPTOTIC_WARNING: &str =
    "asymptotic-only: no finite-size correction installed (ν = 0); rates are not secure against general attacks";

/// Finite-size accounting from the entropy-accumulation bound.
pub fn eat_rate(params: &RateParams, tradeoff: &TradeoffFunction) -> Result<RateReport> {
    params.validate()?;
    let h_round = tradeoff.eval(params.omega_exp)?;
    let nu = tradeoff.correction(params)?;
    let h_total = params.n as f64 * h_round - (params.n as f64).sqrt() * nu;
    let ell_max = max_output_length(h_total, params.eps_h, params.eps_r);
    let r_net = net_randomness(ell_max.unwrap_or(0) as f64, params.n, params.gamma);
    let eps_at_requested = leftover_epsilon(params.ell as f64, h_total, params.eps_h);
    Ok(RateReport {
        n: params.n,
        h_round,
        nu,
        h_total,
        ell_max,
        r_net,
        rate_per_round: r_net / params.n as f64,
        eps_at_requested,
        soundness: soundness_epsilon(&[params.eps_s, eps_at_requested])?,
        warning: tradeoff.asymptotic_only().then(|| ASYMPTOTIC_WARNING.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn leftover_substitutions() {
        assert!((leftover_epsilon(10.0, 10.0, 0.25) - 1.5).abs() < 1e-15);
        let e = leftover_epsilon(40.0, 100.0, 2f64.powi(-40));
        assert_eq!(e, 2f64.powi(-30) + 2f64.powi(-39));
    }

    #[test]
    fn max_length_is_tight() {
        let (h, eh, er) = (1000.0, 1e-12, 1e-6);
        let ell = max_output_length(h, eh, er).unwrap();
        assert!(leftover_epsilon(ell as f64, h, eh) <= er);
        assert!(leftover_epsilon(ell as f64 + 1.0, h, eh) > er);
        assert_eq!(max_output_length(h, 1e-6, 1e-6), None);
        assert_eq!(max_output_length(5.0, 0.0, 1e-6), None);
    }

    #[test]
    fn soundness_is_the_larger_term() {
        assert_eq!(soundness_epsilon(&[1e-3, 1e-9]).unwrap(), 1e-3);
        assert_eq!(soundness_epsilon(&[1e-9, 1e-3]).unwrap(), 1e-3);
        assert_eq!(soundness_epsilon(&[1e-6, 1e-6]).unwrap(), 1e-6);
        assert!(soundness_epsilon(&[-1.0]).is_err());
    }

    #[test]
    fn net_randomness_by_hand() {
        // H_bin(1/2) = 1.
        assert_eq!(net_randomness(100.0, 10, 0.5), 100.0 - 10.0 * 2.5 + 2.0);
        assert_eq!(net_randomness(0.0, 7, 1.0), -19.0);
    }

    #[test]
    fn full_testing_costs_more_than_it_yields() {
        let p = RateParams {
            gamma: 1.0,
            n: 10_000,
            ..Default::default()
        };
        let r = eat_rate(&p, &TradeoffFunction::constant(2.0)).unwrap();
        assert!(r.r_net < 0.0);
        assert_eq!(r.warning.as_deref(), Some(ASYMPTOTIC_WARNING));
    }

    #[test]
    fn vanishing_test_rate_recovers_h() {
        let h = 0.731;
        let p = RateParams {
            n: 1_000_000_000,
            gamma: 1e-12,
            ..Default::default()
        };
        let r = eat_rate(&p, &TradeoffFunction::constant(h)).unwrap();
        assert!((r.rate_per_round - h).abs() < 1e-6, "{}", r.rate_per_round);
    }

    #[test]
    fn correction_gap_shrinks_like_inverse_sqrt_n() {
        let f = TradeoffFunction::constant(1.0).with_correction(|_| 3.0);
        let rate = |n| {
            eat_rate(
                &RateParams {
                    n,
                    ..Default::default()
                },
                &f,
            )
            .unwrap()
            .rate_per_round
        };
        let free = |n| {
            eat_rate(
                &RateParams {
                    n,
                    ..Default::default()
                },
                &TradeoffFunction::constant(1.0),
            )
            .unwrap()
            .rate_per_round
        };
        let gaps: Vec<f64> = [10_000u64, 1_000_000, 100_000_000]
            .iter()
            .map(|&n| free(n) - rate(n))
            .collect();
        assert!(rate(1_000_000) > rate(10_000));
        assert!(
            (gaps[0] / gaps[1] - 10.0).abs() < 0.5 && (gaps[1] / gaps[2] - 10.0).abs() < 0.5,
            "{gaps:?}"
        );
        assert!(eat_rate(&RateParams::default(), &f).unwrap().warning.is_none());
    }

    #[test]
    fn samples_interpolate_from_below() {
        let f = TradeoffFunction::from_samples(vec![(0.75, 0.0), (0.8, 0.3), (0.85, 1.0)]).unwrap();
        assert_eq!(f.eval(0.79).unwrap(), 0.0);
        assert_eq!(f.eval(0.8).unwrap(), 0.3);
        assert_eq!(f.eval(0.85).unwrap(), 1.0);
        assert!(f.eval(0.9).is_err());
        assert!(TradeoffFunction::from_samples(vec![(0.8, 1.0), (0.85, 0.5)]).is_err());
    }

    #[test]
    fn abort_threshold_is_strict() {
        let p = RateParams {
            n: 1000,
            gamma: 0.125,
            omega_exp: 0.75,
            delta: 0.25,
            ..Default::default()
        };
        let t = p.abort_threshold().floor() as u64;
        assert_eq!(t, 62);
        assert!(!p.aborts(t));
        assert!(p.aborts(t + 1));
    }

    #[test]
    fn invalid_params_rejected() {
        for p in [
            RateParams {
                n: 0,
                ..Default::default()
            },
            RateParams {
                gamma: 0.0,
                ..Default::default()
            },
            RateParams {
                omega_exp: 1.2,
                ..Default::default()
            },
            RateParams {
                eps_h: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    proptest! {
        #[test]
        fn leftover_increases_with_length(h in 0.0f64..500.0, a in 0.0f64..500.0, b in 0.0f64..500.0, eh in 0.0f64..1e-3) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(leftover_epsilon(lo, h, eh) <= leftover_epsilon(hi, h, eh));
        }

        #[test]
        fn abort_boundary(n in 1u64..1_000_000, gamma in 0.01f64..1.0, omega in 0.5f64..1.0, delta in 0.0f64..0.1) {
            let p = RateParams { n, gamma, omega_exp: omega, delta, ..Default::default() };
            let t = p.abort_threshold().floor() as u64;
            prop_assert!(!p.aborts(t) && p.aborts(t + 1));
        }
    }
}
