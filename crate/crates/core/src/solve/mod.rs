//! Solver backends, model file export and the exhaustive oracle.

pub mod export;
pub mod highs;
pub mod oracle;

use std::path::PathBuf;

pub use self::highs::{relative_gap, solve_model_file, HighsBackend};
pub use export::{parse_lp, parse_mps, write_model, ModelFormat};
pub use oracle::{oracle_enumerate, OracleOptions, OracleResult};

use crate::error::{Error, Result};
use crate::model::MipProblem;

/// Environment variable selecting the default backend by name.
pub const BACKEND_ENV: &str = "PHS_SITING_BACKEND";

/// Names accepted by [`backend_by_name`].
pub const AVAILABLE_BACKENDS: &[&str] = &["highs"];

/// Violation tolerance applied when re-checking a backend's incumbent.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    /// Incumbent callbacks that may add rows during the search.
    pub supports_callbacks: bool,
    /// Can solve a model straight from an MPS/LP file.
    pub reads_model_files: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveLimits {
    pub time_limit_s: Option<f64>,
    /// Relative gap at which the search may stop, as a fraction.
    pub gap_target: f64,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    /// Solver log destination.
    pub log_path: Option<PathBuf>,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            time_limit_s: None,
            gap_target: 0.0,
            threads: Some(1),
            seed: None,
            log_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Optimal,
    /// Stopped by a limit other than time, with an incumbent.
    Feasible,
    Infeasible,
    /// Time limit reached; an incumbent may or may not exist.
    TimeLimit,
    Error(String),
}

impl SolveStatus {
    pub fn label(&self) -> &str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::Error(_) => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Incumbent in variable order.
    pub values: Option<Vec<f64>>,
    /// Incumbent objective, constant included.
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    /// Relative gap `(incumbent − bound) / |incumbent|`.
    pub gap: Option<f64>,
    pub wall_time_s: f64,
    pub num_vars: usize,
    pub num_rows: usize,
}

/// A mixed-integer solver. Implementations must be usable from several
/// threads at once, one solve per problem.
pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn capabilities(&self) -> Capabilities;
    fn solve(&self, problem: &MipProblem, limits: &SolveLimits) -> Result<SolveOutcome>;
}

pub fn backend_by_name(name: &str) -> Result<Box<dyn SolverBackend>> {
    match name.to_ascii_lowercase().as_str() {
        "highs" => Ok(Box::new(HighsBackend)),
        other => Err(Error::Backend(format!(
            "unknown backend {other:?}; available: {}",
            AVAILABLE_BACKENDS.join(", ")
        ))),
    }
}

/// Backend named by [`BACKEND_ENV`], or HiGHS.
pub fn default_backend() -> Result<Box<dyn SolverBackend>> {
    match std::env::var(BACKEND_ENV) {
        Ok(name) if !name.trim().is_empty() => backend_by_name(name.trim()),
        _ => Ok(Box::new(HighsBackend)),
    }
}

/// Solves and re-checks the incumbent against every row, bound and
/// integrality requirement of `problem`.
pub fn solve(problem: &MipProblem, backend: &dyn SolverBackend, limits: &SolveLimits) -> Result<SolveOutcome> {
    let out = backend.solve(problem, limits)?;
    if let Some(values) = &out.values {
        let v = problem.max_violation(values);
        if v.amount > FEASIBILITY_TOLERANCE {
            return Err(Error::InvalidIncumbent(format!(
                "{} returned an incumbent violating {} by {:.3e}",
                backend.name(),
                v.location.unwrap_or_default(),
                v.amount
            )));
        }
    }
    Ok(out)
}
