//! Solution strategies: the connectivity ladder and coarse-to-fine zoom-in.

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::connectivity::{add_plane_slices, check_and_escalate, violated_slices, ConnectivityLevel, Verdict};
use crate::costing::CostParams;
use crate::error::{Error, Result};
use crate::model::{build_base, build_model, extract_solution, MipProblem, ModelOptions, ReservoirSolution, SitingInstance};
use crate::num::Scalar;
use crate::sizing::SitingSpec;
use crate::solve::{self, SolveLimits, SolveOutcome, SolveStatus, SolverBackend};
use crate::terrain::{
    aggregate, connected_components, default_clip_margin, distance_field, window_grid, Adjacency, Cell, Mask,
    TerrainGrid, Window,
};

/// How the total time limit is shared between zoom steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BudgetScheme {
    /// Step `i` of `n` must finish by `(i + 1)/n` of the limit; unused time
    /// carries over to later steps.
    #[default]
    Split,
    /// One deadline for the whole run.
    Shared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub ladder: Vec<ConnectivityLevel>,
    /// Strictly decreasing, ending in 1.
    pub zoom_factors: Vec<usize>,
    /// Margin in cells of the finer grid; `None` uses [`default_clip_margin`]
    /// of the refinement ratio.
    pub clip_margin: Option<usize>,
    pub time_limit_s: Option<f64>,
    pub budget: BudgetScheme,
    /// Relative gap at which a solve may stop, as a fraction.
    pub gap_target: f64,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    /// Add plane rows only for slices an incumbent violates, re-solving until
    /// none is violated.
    pub lazy: bool,
    /// Accept a ladder that does not end at the tour level.
    pub allow_partial_ladder: bool,
    /// In zoom-in, start each finer ladder at the level that produced the
    /// last connected coarse answer.
    pub carry_level: bool,
    pub model: ModelOptions,
    /// Solver logs of every solve are appended here.
    pub log_path: Option<PathBuf>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            ladder: ConnectivityLevel::ALL.to_vec(),
            zoom_factors: vec![8, 4, 2, 1],
            clip_margin: None,
            time_limit_s: None,
            budget: BudgetScheme::Split,
            gap_target: 0.0,
            threads: Some(1),
            seed: None,
            lazy: false,
            allow_partial_ladder: false,
            carry_level: false,
            model: ModelOptions::default(),
            log_path: None,
        }
    }
}

impl StrategyConfig {
    /// Every violated rule, as `(field, message)`.
    pub fn diagnostics(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut err = |f: &str, m: String| out.push((f.to_string(), m));
        if self.ladder.is_empty() {
            err("ladder", "must list at least one level".into());
        } else {
            if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
                err("ladder", "levels must be strictly increasing".into());
            }
            if !self.allow_partial_ladder && self.ladder.last() != Some(&ConnectivityLevel::Tsp) {
                err("ladder", "must end at tsp unless allow_partial_ladder is set".into());
            }
        }
        if self.zoom_factors.is_empty() {
            err("zoom_factors", "must list at least one factor".into());
        } else {
            if self.zoom_factors.contains(&0) {
                err("zoom_factors", "factors must be positive".into());
            }
            if self.zoom_factors.windows(2).any(|w| w[0] <= w[1]) {
                err("zoom_factors", "factors must be strictly decreasing".into());
            }
            if self.zoom_factors.last() != Some(&1) {
                err("zoom_factors", "last factor must be 1".into());
            }
        }
        if let Some(t) = self.time_limit_s {
            if !(t > 0.0) || !t.is_finite() {
                err("time_limit_s", format!("must be positive, got {t}"));
            }
        }
        if !(0.0..1.0).contains(&self.gap_target) {
            err("gap_target", format!("must lie in [0, 1), got {}", self.gap_target));
        }
        if self.threads == Some(0) {
            err("threads", "must be at least 1".into());
        }
        if !matches!(self.model.perimeter_min_neighbors, 1 | 3) {
            err("perimeter_min_neighbors", "must be 1 or 3".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = d.into_iter().map(|(f, m)| format!("{f}: {m}")).collect();
            Err(Error::Config(msg.join("; ")))
        }
    }
}

/// One solve attempt recorded while running a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    /// Aggregation factor of the grid solved.
    pub factor: usize,
    pub level: ConnectivityLevel,
    pub status: String,
    pub cost: Option<f64>,
    pub gap: Option<f64>,
    pub wall_time_s: f64,
    pub num_vars: usize,
    pub num_rows: usize,
    /// Solved window in the coordinates of the aggregated grid.
    pub window: Window,
    pub components: usize,
    pub note: String,
}

impl TraceEntry {
    pub const CSV_HEADER: &'static str =
        "factor,level,status,cost,gap,wall_time_s,num_vars,num_rows,row0,col0,rows,cols,components,note";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{:.3},{},{},{},{},{},{},{},{}",
            self.factor,
            self.level,
            self.status,
            opt(self.cost),
            opt(self.gap),
            self.wall_time_s,
            self.num_vars,
            self.num_rows,
            self.window.row0,
            self.window.col0,
            self.window.rows,
            self.window.cols,
            self.components,
            self.note.replace(',', ";"),
        )
    }
}

/// What a strategy produced. `solution` is `None` when no level found an
/// incumbent; a fragmented best effort is returned with `valid == false`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    pub solution: Option<ReservoirSolution>,
    pub trace: Vec<TraceEntry>,
    /// Size of the largest model solved.
    pub num_vars: usize,
    pub num_rows: usize,
    pub wall_time_s: f64,
}

impl StrategyOutcome {
    /// Status of the last attempt, or `"no_solve"`.
    pub fn last_status(&self) -> &str {
        self.trace.last().map_or("no_solve", |t| t.status.as_str())
    }
}

struct Run<'a> {
    config: &'a StrategyConfig,
    backend: &'a dyn SolverBackend,
    trace: Vec<TraceEntry>,
    num_vars: usize,
    num_rows: usize,
}

impl<'a> Run<'a> {
    fn new(config: &'a StrategyConfig, backend: &'a dyn SolverBackend) -> Self {
        Run {
            config,
            backend,
            trace: Vec::new(),
            num_vars: 0,
            num_rows: 0,
        }
    }

    fn limits(&self, deadline: Option<Instant>) -> SolveLimits {
        SolveLimits {
            time_limit_s: deadline.map(|d| d.saturating_duration_since(Instant::now()).as_secs_f64().max(0.01)),
            gap_target: self.config.gap_target,
            threads: self.config.threads,
            seed: self.config.seed,
            log_path: self.config.log_path.as_ref().map(|p| p.with_extension("part.log")),
        }
    }

    fn solve(&mut self, p: &MipProblem, deadline: Option<Instant>, label: &str) -> Result<SolveOutcome> {
        let limits = self.limits(deadline);
        let out = solve::solve(p, self.backend, &limits);
        if let (Some(part), Some(log)) = (&limits.log_path, &self.config.log_path) {
            append_log(part, log, label)?;
        }
        let out = out?;
        self.num_vars = self.num_vars.max(p.num_vars());
        self.num_rows = self.num_rows.max(p.num_rows());
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        factor: usize,
        level: ConnectivityLevel,
        status: &str,
        out: Option<&SolveOutcome>,
        window: Window,
        components: usize,
        note: impl Into<String>,
    ) {
        self.trace.push(TraceEntry {
            factor,
            level,
            status: status.to_string(),
            cost: out.and_then(|o| o.objective),
            gap: out.and_then(|o| o.gap),
            wall_time_s: out.map_or(0.0, |o| o.wall_time_s),
            num_vars: out.map_or(0, |o| o.num_vars),
            num_rows: out.map_or(0, |o| o.num_rows),
            window,
            components,
            note: note.into(),
        });
    }

    /// Solves `level` on `inst`, growing plane rows from violated slices in
    /// lazy mode. Returns the final outcome and the problem it belongs to.
    fn solve_level<T: Scalar>(
        &mut self,
        inst: &SitingInstance<T>,
        level: ConnectivityLevel,
        deadline: Option<Instant>,
        factor: usize,
        window: Window,
    ) -> Result<Option<(MipProblem, SolveOutcome)>> {
        let label = format!("factor {factor} level {level}");
        let built = if self.config.lazy && !level.plane_axes().is_empty() {
            let base_level = if level.uses_tour() { ConnectivityLevel::Tsp } else { ConnectivityLevel::None };
            lazy_base(inst, base_level, &self.config.model)
        } else {
            build_model(inst, level, &self.config.model)
        };
        let mut p = match built {
            Ok(p) => p,
            Err(e @ Error::TourTooSmall { .. }) => {
                self.record(factor, level, "skipped", None, window, 0, e.to_string());
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        let (rows, cols) = (inst.grid.rows(), inst.grid.cols());
        loop {
            let out = self.solve(&p, deadline, &label)?;
            let Some(values) = out.values.clone() else {
                return Ok(Some((p, out)));
            };
            if !(self.config.lazy && !level.plane_axes().is_empty()) {
                return Ok(Some((p, out)));
            }
            let interior = Mask::from_cells(rows, cols, p.keys().filter_map(|(k, id)| match k {
                crate::model::VarKey::Y(c) if values[id.0] > 0.5 => Some(c),
                _ => None,
            }));
            let cuts = violated_slices(&interior, level.plane_axes());
            if cuts.is_empty() {
                return Ok(Some((p, out)));
            }
            self.record(factor, level, "lazy_cut", Some(&out), window, 0, format!("{} slices added", cuts.len()));
            let mut b = p.into_builder();
            add_plane_slices(&mut b, &inst.cands, &cuts);
            p = b.finish();
            if deadline.is_some_and(|d| Instant::now() >= d) {
                let out = self.solve(&p, deadline, &label)?;
                return Ok(Some((p, out)));
            }
        }
    }

    fn ladder<T: Scalar>(
        &mut self,
        inst: &SitingInstance<T>,
        deadline: Option<Instant>,
        factor: usize,
        window: Window,
        from: ConnectivityLevel,
    ) -> Result<Option<ReservoirSolution>> {
        let mut best_fragmented: Option<ReservoirSolution> = None;
        let levels: Vec<_> = self.config.ladder.iter().copied().filter(|&l| l >= from).collect();
        for level in levels {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                self.record(factor, level, "skipped", None, window, 0, "time budget exhausted");
                break;
            }
            let Some((p, out)) = self.solve_level(inst, level, deadline, factor, window)? else {
                continue;
            };
            let Some(values) = &out.values else {
                let status = out.status.label().to_string();
                self.record(factor, level, &status, Some(&out), window, 0, "no incumbent");
                if out.status == SolveStatus::Infeasible {
                    // Higher levels only add rows.
                    break;
                }
                continue;
            };
            let mut sol = extract_solution(&p, values, inst)?;
            sol.level = level;
            sol.gap = out.gap;
            sol.wall_time_s = out.wall_time_s;
            let verdict = check_and_escalate(&sol.reservoir_mask(inst.grid.rows(), inst.grid.cols()));
            let status = out.status.label().to_string();
            match verdict {
                Verdict::Connected if sol.valid => {
                    self.record(factor, level, &status, Some(&out), window, 1, "connected");
                    return Ok(Some(sol));
                }
                Verdict::Connected => {
                    self.record(factor, level, &status, Some(&out), window, 1, "rules violated");
                }
                Verdict::Fragmented(comps) => {
                    self.record(factor, level, &status, Some(&out), window, comps.len(), "fragmented");
                    if best_fragmented.as_ref().is_none_or(|b| sol.costs.total < b.costs.total) {
                        best_fragmented = Some(sol);
                    }
                }
            }
        }
        Ok(best_fragmented.map(|mut s| {
            s.valid = false;
            s
        }))
    }

    fn finish(self, solution: Option<ReservoirSolution>, start: Instant) -> StrategyOutcome {
        let wall_time_s = start.elapsed().as_secs_f64();
        let solution = solution.map(|mut s| {
            s.trace = self.trace.clone();
            s.num_vars = self.num_vars;
            s.num_rows = self.num_rows;
            s.wall_time_s = wall_time_s;
            s
        });
        StrategyOutcome {
            solution,
            trace: self.trace,
            num_vars: self.num_vars,
            num_rows: self.num_rows,
            wall_time_s,
        }
    }
}

fn lazy_base<T: Scalar>(inst: &SitingInstance<T>, level: ConnectivityLevel, opts: &ModelOptions) -> Result<MipProblem> {
    let mut b = build_base(inst, opts)?;
    if level.uses_tour() {
        crate::connectivity::build_tsp_constraints(&mut b, &inst.cands, opts.literal_u_bound)?;
    }
    Ok(b.finish())
}

fn append_log(part: &Path, log: &Path, label: &str) -> Result<()> {
    let text = std::fs::read_to_string(part).unwrap_or_default();
    let _ = std::fs::remove_file(part);
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(log)
        .map_err(|e| Error::io(log, e))?;
    writeln!(f, "==== {label} ====\n{text}").map_err(|e| Error::io(log, e))
}

/// Solves `inst` level by level until the reservoir is one 4-connected
/// component.
pub fn run_ladder<T: Scalar>(
    inst: &SitingInstance<T>,
    config: &StrategyConfig,
    backend: &dyn SolverBackend,
) -> Result<StrategyOutcome> {
    config.validate()?;
    let start = Instant::now();
    let deadline = config.time_limit_s.map(|t| start + Duration::from_secs_f64(t));
    let mut run = Run::new(config, backend);
    let window = Window::full(inst.grid.rows(), inst.grid.cols());
    let sol = run.ladder(inst, deadline, 1, window, ConnectivityLevel::None)?;
    Ok(run.finish(sol, start))
}

/// A super-cell is excluded when any of its children is.
pub fn aggregate_excluded(mask: &Mask, factor: usize) -> Mask {
    let rows = mask.rows().div_ceil(factor);
    let cols = mask.cols().div_ceil(factor);
    let mut out = Mask::new(rows, cols);
    for c in mask.cells() {
        out.set(Cell::new(c.row / factor, c.col / factor), true);
    }
    out
}

/// Window on the grid of factor `fine` covering the cells of `mask`, given on
/// the grid of factor `coarse`, grown by `margin` fine cells.
pub fn refine_window(mask: &Mask, coarse: usize, fine: usize, margin: usize, rows: usize, cols: usize) -> Option<Window> {
    let (r0, c0, r1, c1) = mask.bounding_box()?;
    let lo = |i: usize| (i * coarse / fine).saturating_sub(margin);
    let hi = |i: usize, n: usize| (((i + 1) * coarse).div_ceil(fine) + margin).min(n);
    let (row0, col0) = (lo(r0).min(rows - 1), lo(c0).min(cols - 1));
    Some(Window {
        row0,
        col0,
        rows: hi(r1, rows) - row0,
        cols: hi(c1, cols) - col0,
    })
}

/// Coarse-to-fine search: solve on an aggregated grid, clip around the
/// answer and repeat on finer grids down to the original resolution.
///
/// The storage target stays in absolute m³ at every factor and the distance
/// field is computed on the whole aggregated grid before clipping. Coarse
/// factors without an incumbent are skipped; only the last factor must
/// succeed. The returned solution is re-evaluated on the full-resolution
/// instance.
pub fn run_zoom_in<T: Scalar>(
    grid: &TerrainGrid<T>,
    spec: &SitingSpec<T>,
    params: &CostParams<T>,
    excluded: &Mask,
    config: &StrategyConfig,
    backend: &dyn SolverBackend,
) -> Result<StrategyOutcome> {
    config.validate()?;
    let start = Instant::now();
    let mut run = Run::new(config, backend);
    let n = config.zoom_factors.len();
    // Reservoir of the last answer, or failing that the last window solved,
    // on the grid of the given factor.
    let mut focus: Option<(Mask, usize)> = None;
    let mut last = None;
    let mut from = ConnectivityLevel::None;
    for (i, &factor) in config.zoom_factors.iter().enumerate() {
        let deadline = config.time_limit_s.map(|t| {
            let share = match config.budget {
                BudgetScheme::Split => t * (i + 1) as f64 / n as f64,
                BudgetScheme::Shared => t,
            };
            start + Duration::from_secs_f64(share)
        });
        let agg = aggregate(grid, factor)?;
        let excl = aggregate_excluded(excluded, factor);
        let (rows, cols) = (agg.rows(), agg.cols());
        let window = match &focus {
            Some((mask, coarse)) => {
                let margin = config.clip_margin.unwrap_or_else(|| default_clip_margin((coarse / factor).max(1)));
                refine_window(mask, *coarse, factor, margin, rows, cols).unwrap_or(Window::full(rows, cols))
            }
            None => Window::full(rows, cols),
        };
        let is_last = i + 1 == n;
        let solved_area = Mask::from_fn(rows, cols, |c| window.contains(c));
        let inst = match instance_on_window(&agg, &window, &excl, spec, params) {
            Ok(inst) => inst,
            Err(e) if !is_last && coarse_skippable(&e) => {
                run.record(factor, config.ladder[0], "skipped", None, window, 0, e.to_string());
                focus = Some((solved_area, factor));
                continue;
            }
            Err(e) => return Err(e),
        };
        let sol = match run.ladder(&inst, deadline, factor, window, from) {
            Ok(sol) => sol.map(|s| s.map_cells(|c| window.to_global(c))),
            Err(e) if !is_last && coarse_skippable(&e) => {
                run.record(factor, config.ladder[0], "skipped", None, window, 0, e.to_string());
                focus = Some((solved_area, factor));
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Some(s) = sol.as_ref().filter(|s| s.valid && config.carry_level) {
            from = s.level;
        }
        focus = Some(match &sol {
            Some(s) => {
                let mask = Mask::from_cells(rows, cols, s.reservoir.iter().copied());
                let comps = connected_components(&mask, Adjacency::Four);
                (Mask::from_cells(rows, cols, comps[0].iter().copied()), factor)
            }
            None => (solved_area, factor),
        });
        if is_last {
            last = sol;
        }
    }
    let solution = match last {
        Some(s) => Some(reevaluate_full(grid, spec, params, excluded, s, config)?),
        None => None,
    };
    Ok(run.finish(solution, start))
}

fn coarse_skippable(e: &Error) -> bool {
    matches!(
        e,
        Error::VolumeInfeasible { .. }
            | Error::EmptyInterior { .. }
            | Error::EmptyPerimeter
            | Error::EmptyLowerMask
            | Error::InvalidGrid(_)
    )
}

fn instance_on_window<T: Scalar>(
    agg: &TerrainGrid<T>,
    window: &Window,
    excluded: &Mask,
    spec: &SitingSpec<T>,
    params: &CostParams<T>,
) -> Result<SitingInstance<T>> {
    let dist = distance_field(agg)?.window(window);
    let sub = window_grid(agg, window)?;
    SitingInstance::new(sub, dist, *spec, *params, &window.crop_mask(excluded))
}

/// Rebuilds a factor-1 answer on the full grid and checks it there.
fn reevaluate_full<T: Scalar>(
    grid: &TerrainGrid<T>,
    spec: &SitingSpec<T>,
    params: &CostParams<T>,
    excluded: &Mask,
    s: ReservoirSolution,
    config: &StrategyConfig,
) -> Result<ReservoirSolution> {
    let dist = distance_field(grid)?;
    let inst = SitingInstance::new(grid.clone(), dist, *spec, *params, excluded)?;
    let (rows, cols) = (grid.rows(), grid.cols());
    let perimeter = s.perimeter_mask(rows, cols);
    let interior = s.interior_mask(rows, cols);
    let mut full = ReservoirSolution::from_masks(&inst, &perimeter, &interior, s.link)?;
    if let Err(msg) = full.check_on(&inst, &config.model) {
        return Err(Error::InvalidIncumbent(format!("zoom-in answer fails on the full grid: {msg}")));
    }
    full.valid = full.valid && s.valid;
    full.level = s.level;
    full.gap = s.gap;
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_diagnostics() {
        assert!(StrategyConfig::default().diagnostics().is_empty());
        let bad = StrategyConfig {
            ladder: vec![ConnectivityLevel::HvPlanes, ConnectivityLevel::None],
            zoom_factors: vec![4, 4, 2],
            gap_target: 1.5,
            ..Default::default()
        };
        let fields: Vec<String> = bad.diagnostics().into_iter().map(|(f, _)| f).collect();
        assert_eq!(fields, ["ladder", "ladder", "zoom_factors", "zoom_factors", "gap_target"]);
        let partial = StrategyConfig {
            ladder: vec![ConnectivityLevel::None],
            allow_partial_ladder: true,
            ..Default::default()
        };
        assert!(partial.validate().is_ok());
    }

    #[test]
    fn excluded_aggregation_is_conservative() {
        let m = Mask::from_cells(5, 5, [Cell::new(0, 0), Cell::new(4, 4)]);
        let a = aggregate_excluded(&m, 2);
        assert_eq!((a.rows(), a.cols()), (3, 3));
        assert_eq!(a.cells().collect::<Vec<_>>(), vec![Cell::new(0, 0), Cell::new(2, 2)]);
    }

    #[test]
    fn window_refinement() {
        let m = Mask::from_cells(4, 4, [Cell::new(1, 1), Cell::new(2, 1)]);
        // Coarse rows 1..=2 at factor 4 are fine rows 2..6 at factor 2.
        let w = refine_window(&m, 4, 2, 0, 8, 8).unwrap();
        assert_eq!(w, Window { row0: 2, col0: 2, rows: 4, cols: 2 });
        let w = refine_window(&m, 4, 2, 3, 8, 8).unwrap();
        assert_eq!(w, Window { row0: 0, col0: 0, rows: 8, cols: 7 });
        assert!(refine_window(&Mask::new(4, 4), 4, 2, 0, 8, 8).is_none());
    }

    #[test]
    fn trace_rows_have_header_width() {
        let t = TraceEntry {
            factor: 2,
            level: ConnectivityLevel::Tsp,
            status: "optimal".into(),
            cost: Some(1.5),
            gap: None,
            wall_time_s: 0.25,
            num_vars: 10,
            num_rows: 4,
            window: Window::full(3, 3),
            components: 1,
            note: "a, b".into(),
        };
        assert_eq!(t.csv_row().split(',').count(), TraceEntry::CSV_HEADER.split(',').count());
    }
}
