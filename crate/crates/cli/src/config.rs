//! Run configuration: one JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use netrand::npa::{Formulation, Level};
use netrand::randomness::RateParams;
use netrand::sdp::SolverConfig;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    #[default]
    Broadcast,
    Chsh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum FormulationName {
    #[default]
    Blocked,
    Direct,
}

impl From<FormulationName> for Formulation {
    fn from(f: FormulationName) -> Self {
        match f {
            FormulationName::Blocked => Formulation::Blocked,
            FormulationName::Direct => Formulation::Direct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalName {
    #[default]
    Broadcast,
    Chsh,
}

/// Noise parameters, either listed or as an inclusive grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum AlphaGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Default for AlphaGrid {
    fn default() -> Self {
        AlphaGrid::Range {
            start: 0.0,
            stop: 1.0,
            step: 0.05,
        }
    }
}

impl AlphaGrid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        let values = match self {
            AlphaGrid::List(v) => v.clone(),
            &AlphaGrid::Range { start, stop, step } => {
                if !(step > 0.0) || !(stop >= start) {
                    return Err(CliError::Config("alphas: need step > 0 and stop >= start".into()));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                // Rounded so that grid points print as written.
                (0..=n)
                    .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                    .collect()
            }
        };
        if let Some(a) = values.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(CliError::Config(format!("alpha {a} outside [0, 1]")));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SeesawSection {
    pub restarts: usize,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SeesawSection {
    fn default() -> Self {
        let d = netrand::functionals::SeesawConfig::default();
        Self {
            restarts: d.restarts,
            tol: d.tol,
            max_sweeps: d.max_sweeps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            gap_tol: d.gap_tol,
            feas_tol: d.feas_tol,
            max_iter: d.max_iter,
        }
    }
}

impl From<SolverSection> for SolverConfig {
    fn from(s: SolverSection) -> Self {
        SolverConfig {
            gap_tol: s.gap_tol,
            feas_tol: s.feas_tol,
            max_iter: s.max_iter,
        }
    }
}

/// Protocol parameters; see the `rate` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct RateSection {
    pub n: u64,
    pub gamma: f64,
    pub omega_exp: f64,
    pub delta: f64,
    pub eps_h: f64,
    pub eps_r: f64,
    pub eps_s: f64,
    pub ell: u64,
}

impl Default for RateSection {
    fn default() -> Self {
        let p = RateParams::default();
        Self {
            n: p.n,
            gamma: p.gamma,
            omega_exp: p.omega_exp,
            delta: p.delta,
            eps_h: p.eps_h,
            eps_r: p.eps_r,
            eps_s: p.eps_s,
            ell: p.ell,
        }
    }
}

impl From<RateSection> for RateParams {
    fn from(s: RateSection) -> Self {
        RateParams {
            n: s.n,
            gamma: s.gamma,
            omega_exp: s.omega_exp,
            delta: s.delta,
            eps_h: s.eps_h,
            eps_r: s.eps_r,
            eps_s: s.eps_s,
            ell: s.ell,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct CertifySection {
    /// Behavior CSV (`x,y1,y2,a,b1,b2,p` for the broadcast scenario).
    pub behavior: Option<PathBuf>,
    /// Largest accepted normalization, negativity or signaling residual.
    pub tol: f64,
}

impl Default for CertifySection {
    fn default() -> Self {
        Self {
            behavior: None,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct LocalitySection {
    /// Behavior CSV; takes precedence over `alpha`.
    pub behavior: Option<PathBuf>,
    /// Noise parameter of the broadcast state.
    pub alpha: Option<f64>,
    pub tol: f64,
}

impl Default for LocalitySection {
    fn default() -> Self {
        Self {
            behavior: None,
            alpha: Some(1.0),
            tol: netrand::locality::DEFAULT_MEMBERSHIP_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplerSpec {
    /// Wins with probability `omega_exp + delta`.
    #[default]
    Honest,
    /// Wins with the given probability.
    Score(f64),
    /// Born-rule behavior of the broadcast state at this noise parameter.
    Alpha(f64),
    /// Behavior CSV.
    Behavior(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub sampler: SamplerSpec,
    pub functional: FunctionalName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractSection {
    /// Transcript CSV written by `simulate`.
    pub transcript: Option<PathBuf>,
    /// Output length; `rate.ell` when absent.
    pub ell: Option<u64>,
    /// Hex seed, bits read most significant first; drawn from the global
    /// seed when absent.
    pub seed_hex: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum EntropySource {
    /// Relaxation bound for the configured functional, target and level.
    Npa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum EntropySpec {
    Bits(f64),
    Source(EntropySource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct RateTableSection {
    pub ns: Vec<u64>,
    /// Per-round entropy `h(omega_exp)`: a number of bits or `"npa"`.
    pub h: EntropySpec,
    pub functional: FunctionalName,
    /// Constant finite-size correction; zero means asymptotic only.
    pub nu: f64,
}

impl Default for RateTableSection {
    fn default() -> Self {
        Self {
            ns: vec![10_000, 100_000, 1_000_000, 10_000_000, 100_000_000, 1_000_000_000],
            h: EntropySpec::Source(EntropySource::Npa),
            functional: FunctionalName::Broadcast,
            nu: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    #[default]
    Full,
    Inequality,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ExportSection {
    /// Behavior CSV; takes precedence over `alpha`.
    pub behavior: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub constraint: ConstraintKind,
}

impl Default for ExportSection {
    fn default() -> Self {
        Self {
            behavior: None,
            alpha: Some(1.0),
            constraint: ConstraintKind::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct RunConfig {
    pub scenario: ScenarioName,
    /// Party names whose outcomes Eve guesses; `["A", "B1"]` when absent.
    pub target: Option<Vec<String>>,
    /// Inputs at which Eve guesses; all zero when absent.
    pub target_inputs: Option<Vec<usize>>,
    /// Hierarchy level, e.g. `"2"`, `"1+AB"`, `"local"`.
    #[schemars(with = "String")]
    pub level: Level,
    pub formulation: FormulationName,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub alphas: AlphaGrid,
    pub seesaw: SeesawSection,
    /// Explicit Bloch vectors per party and input; skips the see-saw.
    #[schemars(with = "Option<Vec<Vec<[f64; 3]>>>")]
    pub settings: Option<Vec<Vec<netrand::quantum::DichotomicObservable>>>,
    pub solver: SolverSection,
    pub rate: RateSection,
    pub certify: CertifySection,
    pub locality: LocalitySection,
    pub simulate: SimulateSection,
    pub extract: ExtractSection,
    pub rate_table: RateTableSection,
    pub export: ExportSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut self.certify.behavior);
        fix(&mut self.locality.behavior);
        fix(&mut self.export.behavior);
        fix(&mut self.extract.transcript);
        fix(&mut self.out);
        if let SamplerSpec::Behavior(p) = &mut self.simulate.sampler {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

pub fn schema_json() -> String {
    let schema = schemars::schema_for!(RunConfig);
    serde_json::to_string_pretty(&schema).expect("schema serializes") + "\n"
}
