//! Backend selection, including an external solver reached through files.

use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{emit_sdpa, parse_sdpa_solution, solve, ConicProgram, Solution, SolverConfig, Status};
use crate::{Error, Result};

pub const SOLVER_ENV: &str = "NETRAND_SOLVER";
pub const BRIDGE_CMD_ENV: &str = "NETRAND_BRIDGE_CMD";
const DEFAULT_BRIDGE_CMD: &str = "python3 tools/sdpa_bridge.py";

/// External solver invoked as `command… input.dat-s output.sol`.
///
/// The command reads SDPA sparse format and writes a CSDP-style solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileBridge {
    pub command: Vec<String>,
}

impl Default for FileBridge {
    fn default() -> Self {
        Self::from_command_line(DEFAULT_BRIDGE_CMD)
    }
}

impl FileBridge {
    /// Splits a command line on whitespace.
    pub fn from_command_line(line: &str) -> Self {
        Self {
            command: line.split_whitespace().map(str::to_string).collect(),
        }
    }

    pub fn solve(&self, program: &ConicProgram, config: &SolverConfig) -> Result<Solution> {
        static COUNTER: AtomicUsize = AtomicUsize::new(0);
        let (exe, args) = self
            .command
            .split_first()
            .ok_or_else(|| Error::Validation("empty bridge command".into()))?;
        let dir: PathBuf = std::env::temp_dir().join(format!(
            "netrand-bridge-{}-{}",
            std::process::id(),
            COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::create_dir_all(&dir)?;
        let input = dir.join("problem.dat-s");
        let output = dir.join("problem.sol");
        std::fs::write(&input, emit_sdpa(program))?;
        let result = Command::new(exe).args(args).arg(&input).arg(&output).output();
        let outcome = (|| {
            let out = result?;
            if !out.status.success() {
                return Err(Error::Numerical(format!(
                    "bridge command failed ({}): {}",
                    out.status,
                    String::from_utf8_lossy(&out.stderr).trim()
                )));
            }
            let text = std::fs::read_to_string(&output)?;
            let mut sol = parse_sdpa_solution(&text, program)?;
            if sol.primal_residual > config.feas_tol.sqrt() || sol.dual_residual > config.feas_tol.sqrt() {
                sol.status = Status::Stalled;
            }
            Ok(sol)
        })();
        let _ = std::fs::remove_dir_all(&dir);
        outcome
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SolverBackend {
    /// The built-in interior-point method.
    #[default]
    Embedded,
    FileBridge(FileBridge),
}

impl SolverBackend {
    /// Reads `NETRAND_SOLVER` (`embedded` or `file-bridge`) and, for the
    /// bridge, `NETRAND_BRIDGE_CMD`.
    pub fn from_env() -> Result<Self> {
        match std::env::var(SOLVER_ENV).as_deref() {
            Err(_) | Ok("") | Ok("embedded") => Ok(Self::Embedded),
            Ok("file-bridge") => Ok(Self::FileBridge(
                std::env::var(BRIDGE_CMD_ENV)
                    .map(|c| FileBridge::from_command_line(&c))
                    .unwrap_or_default(),
            )),
            Ok(other) => Err(Error::Validation(format!(
                "{SOLVER_ENV}={other}: expected `embedded` or `file-bridge`"
            ))),
        }
    }
}

pub fn solve_with_backend(backend: &SolverBackend, program: &ConicProgram, config: &SolverConfig) -> Result<Solution> {
    match backend {
        SolverBackend::Embedded => solve(program, config),
        SolverBackend::FileBridge(bridge) => bridge.solve(program, config),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Block, Entry};
    use super::*;

    #[test]
    fn command_line_splitting() {
        assert_eq!(FileBridge::default().command, vec!["python3", "tools/sdpa_bridge.py"]);
        assert_eq!(FileBridge::from_command_line("  a  b ").command, vec!["a", "b"]);
    }

    #[test]
    fn failing_command_is_an_error() {
        let mut p = ConicProgram::new(vec![Block::psd(1)]).unwrap();
        p.add_constraint(vec![Entry::new(0, 0, 0, 1.0)], 1.0).unwrap();
        let bridge = FileBridge::from_command_line("false");
        assert!(bridge.solve(&p, &SolverConfig::default()).is_err());
    }
}
