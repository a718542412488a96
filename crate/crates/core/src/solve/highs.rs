//! HiGHS branch-and-bound backend through its C interface.
//!
//! Each solve creates and owns its own HiGHS instance, so concurrent solves
//! from different threads are independent. No callbacks are registered.

#![allow(non_upper_case_globals)]

use std::collections::HashMap;
use std::ffi::{c_void, CStr, CString};
use std::os::raw::c_char;
use std::path::Path;
use std::time::Instant;

use highs_sys::*;

use super::{Capabilities, SolveLimits, SolveOutcome, SolveStatus, SolverBackend};
use crate::error::{Error, Result};
use crate::model::{MipProblem, RowSense};

#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend;

struct Handle(*mut c_void);

impl Handle {
    fn new() -> Self {
        // SAFETY: Highs_create has no preconditions; ownership is released in Drop.
        Handle(unsafe { Highs_create() })
    }

    fn check(&self, status: HighsInt, what: &str) -> Result<()> {
        if status == kHighsStatusError {
            Err(Error::Backend(format!("HiGHS call failed: {what}")))
        } else {
            Ok(())
        }
    }

    fn set_bool(&self, name: &str, v: bool) -> Result<()> {
        let n = cstr(name)?;
        // SAFETY: valid handle and NUL-terminated option name.
        self.check(unsafe { Highs_setBoolOptionValue(self.0, n.as_ptr(), v as HighsInt) }, name)
    }

    fn set_int(&self, name: &str, v: i64) -> Result<()> {
        let n = cstr(name)?;
        let v = HighsInt::try_from(v).map_err(|_| Error::Backend(format!("option {name} out of range")))?;
        // SAFETY: as above.
        self.check(unsafe { Highs_setIntOptionValue(self.0, n.as_ptr(), v) }, name)
    }

    fn set_double(&self, name: &str, v: f64) -> Result<()> {
        let n = cstr(name)?;
        // SAFETY: as above.
        self.check(unsafe { Highs_setDoubleOptionValue(self.0, n.as_ptr(), v) }, name)
    }

    fn set_string(&self, name: &str, v: &str) -> Result<()> {
        let (n, v) = (cstr(name)?, cstr(v)?);
        // SAFETY: as above.
        self.check(unsafe { Highs_setStringOptionValue(self.0, n.as_ptr(), v.as_ptr()) }, name)
    }

    fn double_info(&self, name: &CStr) -> Option<f64> {
        let mut v = 0.0;
        // SAFETY: valid handle, info name and output pointer.
        let st = unsafe { Highs_getDoubleInfoValue(self.0, name.as_ptr(), &mut v) };
        (st == kHighsStatusOk).then_some(v)
    }

    fn int_info(&self, name: &CStr) -> Option<HighsInt> {
        let mut v = 0;
        // SAFETY: as above.
        let st = unsafe { Highs_getIntInfoValue(self.0, name.as_ptr(), &mut v) };
        (st == kHighsStatusOk).then_some(v)
    }

    fn num_cols(&self) -> usize {
        // SAFETY: valid handle.
        unsafe { Highs_getNumCol(self.0) as usize }
    }

    fn num_rows(&self) -> usize {
        // SAFETY: valid handle.
        unsafe { Highs_getNumRow(self.0) as usize }
    }

    fn col_name(&self, col: usize) -> Result<String> {
        let mut buf = vec![0 as c_char; 1024];
        // SAFETY: HiGHS writes at most kHighsMaximumStringLength (512) bytes.
        self.check(unsafe { Highs_getColName(self.0, col as HighsInt, buf.as_mut_ptr()) }, "getColName")?;
        // SAFETY: the buffer is NUL-terminated by HiGHS.
        Ok(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned())
    }

    fn apply_limits(&self, limits: &SolveLimits) -> Result<()> {
        match &limits.log_path {
            Some(path) => {
                self.set_bool("output_flag", true)?;
                self.set_bool("log_to_console", false)?;
                self.set_string("log_file", &path.to_string_lossy())?;
            }
            None => self.set_bool("output_flag", false)?,
        }
        if let Some(t) = limits.time_limit_s {
            self.set_double("time_limit", t.max(0.0))?;
        }
        self.set_double("mip_rel_gap", limits.gap_target.max(0.0))?;
        self.set_double("mip_abs_gap", 1e-6)?;
        self.set_double("mip_feasibility_tolerance", 1e-7)?;
        if let Some(threads) = limits.threads {
            self.set_int("threads", threads as i64)?;
        }
        self.set_int("random_seed", (limits.seed.unwrap_or(0) % (i32::MAX as u64)) as i64)?;
        Ok(())
    }

    fn run(&self, start: Instant, objective_offset: f64) -> Result<SolveOutcome> {
        // SAFETY: valid handle with a model loaded.
        let run = unsafe { Highs_run(self.0) };
        let wall_time_s = start.elapsed().as_secs_f64();
        // SAFETY: valid handle.
        let model_status = unsafe { Highs_getModelStatus(self.0) };
        let has_solution = self.int_info(c"primal_solution_status") == Some(kHighsSolutionStatusFeasible);
        let (ncol, nrow) = (self.num_cols(), self.num_rows());
        let values = if has_solution {
            let mut col = vec![0.0; ncol];
            let mut col_dual = vec![0.0; ncol];
            let mut row = vec![0.0; nrow];
            let mut row_dual = vec![0.0; nrow];
            // SAFETY: buffers sized to the model dimensions.
            let st = unsafe {
                Highs_getSolution(self.0, col.as_mut_ptr(), col_dual.as_mut_ptr(), row.as_mut_ptr(), row_dual.as_mut_ptr())
            };
            self.check(st, "getSolution")?;
            Some(col)
        } else {
            None
        };
        let objective = values.as_ref().map(|_| {
            // SAFETY: valid handle.
            let v = unsafe { Highs_getObjectiveValue(self.0) };
            v + objective_offset
        });
        let bound = self
            .double_info(c"mip_dual_bound")
            .filter(|b| b.is_finite())
            .map(|b| b + objective_offset);
        let status = match model_status {
            kHighsModelStatusOptimal => SolveStatus::Optimal,
            kHighsModelStatusInfeasible | kHighsModelStatusUnboundedOrInfeasible => SolveStatus::Infeasible,
            kHighsModelStatusTimeLimit => SolveStatus::TimeLimit,
            kHighsModelStatusIterationLimit
            | kHighsModelStatusSolutionLimit
            | kHighsModelStatusInterrupt
            | kHighsModelStatusObjectiveBound
            | kHighsModelStatusObjectiveTarget
                if has_solution =>
            {
                SolveStatus::Feasible
            }
            kHighsModelStatusModelEmpty => SolveStatus::Optimal,
            other if run == kHighsStatusError => SolveStatus::Error(format!("HiGHS run failed with model status {other}")),
            other => SolveStatus::Error(format!("HiGHS model status {other}")),
        };
        let gap = match (&status, objective, bound) {
            (SolveStatus::Optimal, Some(_), _) => Some(0.0),
            (_, Some(inc), Some(b)) => Some(relative_gap(inc, b)),
            _ => None,
        };
        Ok(SolveOutcome {
            status,
            values,
            objective,
            bound,
            gap,
            wall_time_s,
            num_vars: ncol,
            num_rows: nrow,
        })
    }
}

impl Drop for Handle {
    fn drop(&mut self) {
        // SAFETY: pointer obtained from Highs_create and dropped once.
        unsafe { Highs_destroy(self.0) }
    }
}

fn cstr(s: &str) -> Result<CString> {
    CString::new(s).map_err(|_| Error::Backend(format!("string contains NUL: {s:?}")))
}

/// `(incumbent − bound) / |incumbent|`, clamped at zero.
pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if incumbent == 0.0 {
        return if bound >= incumbent { 0.0 } else { f64::INFINITY };
    }
    ((incumbent - bound) / incumbent.abs()).max(0.0)
}

impl SolverBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_callbacks: false,
            reads_model_files: true,
        }
    }

    fn solve(&self, problem: &MipProblem, limits: &SolveLimits) -> Result<SolveOutcome> {
        let start = Instant::now();
        let h = Handle::new();
        h.apply_limits(limits)?;
        load(&h, problem)?;
        let mut out = h.run(start, 0.0)?;
        if out.status == SolveStatus::Optimal && problem.num_vars() == 0 {
            out.values = Some(Vec::new());
            out.objective = Some(problem.objective().constant);
        }
        Ok(out)
    }
}

fn load(h: &Handle, problem: &MipProblem) -> Result<()> {
    let ncol = problem.num_vars();
    let nrow = problem.num_rows();
    let mut cost = vec![0.0; ncol];
    for (v, c) in &problem.objective().terms {
        cost[v.0] = *c;
    }
    let lower: Vec<f64> = problem.variables().iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = problem.variables().iter().map(|v| v.upper).collect();
    let integrality: Vec<HighsInt> = problem
        .variables()
        .iter()
        .map(|v| if v.is_integral() { kHighsVarTypeInteger } else { kHighsVarTypeContinuous })
        .collect();
    let mut row_lower = Vec::with_capacity(nrow);
    let mut row_upper = Vec::with_capacity(nrow);
    let mut start = Vec::with_capacity(nrow);
    let mut index = Vec::new();
    let mut value = Vec::new();
    for row in problem.constraints() {
        let (lo, hi) = match row.sense {
            RowSense::Le => (f64::NEG_INFINITY, row.rhs),
            RowSense::Ge => (row.rhs, f64::INFINITY),
            RowSense::Eq => (row.rhs, row.rhs),
        };
        row_lower.push(lo);
        row_upper.push(hi);
        start.push(index.len() as HighsInt);
        for (v, a) in &row.terms {
            index.push(v.0 as HighsInt);
            value.push(*a);
        }
    }
    let to_int = |n: usize| HighsInt::try_from(n).map_err(|_| Error::Backend("model too large for HiGHS".into()));
    // SAFETY: all arrays have the lengths passed alongside them.
    let st = unsafe {
        Highs_passMip(
            h.0,
            to_int(ncol)?,
            to_int(nrow)?,
            to_int(index.len())?,
            kHighsMatrixFormatRowwise,
            kHighsObjSenseMinimize,
            problem.objective().constant,
            cost.as_ptr(),
            lower.as_ptr(),
            upper.as_ptr(),
            row_lower.as_ptr(),
            row_upper.as_ptr(),
            start.as_ptr(),
            index.as_ptr(),
            value.as_ptr(),
            integrality.as_ptr(),
        )
    };
    h.check(st, "passMip")?;
    for (i, v) in problem.variables().iter().enumerate() {
        let n = cstr(&v.name)?;
        // SAFETY: column index in range, NUL-terminated name.
        h.check(unsafe { Highs_passColName(h.0, i as HighsInt, n.as_ptr()) }, "passColName")?;
    }
    for (i, r) in problem.constraints().iter().enumerate() {
        let n = cstr(&r.name)?;
        // SAFETY: row index in range, NUL-terminated name.
        h.check(unsafe { Highs_passRowName(h.0, i as HighsInt, n.as_ptr()) }, "passRowName")?;
    }
    Ok(())
}

/// Reads an MPS or LP file with HiGHS' own parser and solves it. Returns the
/// outcome and the incumbent keyed by column name.
pub fn solve_model_file(path: &Path, limits: &SolveLimits) -> Result<(SolveOutcome, HashMap<String, f64>)> {
    let start = Instant::now();
    let h = Handle::new();
    h.apply_limits(limits)?;
    let p = cstr(&path.to_string_lossy())?;
    // SAFETY: valid handle and NUL-terminated path.
    h.check(unsafe { Highs_readModel(h.0, p.as_ptr()) }, "readModel")?;
    let out = h.run(start, 0.0)?;
    let mut named = HashMap::new();
    if let Some(values) = &out.values {
        for (i, v) in values.iter().enumerate() {
            named.insert(h.col_name(i)?, *v);
        }
    }
    Ok((out, named))
}
