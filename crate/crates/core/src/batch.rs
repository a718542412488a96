//! Case files and batch execution.
//!
//! A case file is TOML. Paths are relative to the file's directory.
//!
//! ```toml
//! output_dir = "out"
//! eta = 0.667
//! workers = 2
//! time_limit_s = 3600
//!
//! [terrain]
//! path = "dem.asc"
//!
//! [lower]
//! level = 385.0
//! tolerance = 0.5
//!
//! [strategy]
//! ladder = ["none", "hv_planes", "hv_diag_planes", "tsp"]
//! zoom_factors = [8, 4, 2, 1]
//!
//! [[case]]
//! head = 175
//! power_mw = 500
//! operation_h = 3
//! zoom = true
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::connectivity::ConnectivityLevel;
use crate::costing::CostParams;
use crate::error::{Error, Result};
use crate::model::{ModelOptions, ReservoirSolution, SitingInstance};
use crate::sizing::{SitingSpec, DEFAULT_EFFICIENCY};
use crate::solve::{backend_by_name, default_backend, SolverBackend, AVAILABLE_BACKENDS};
use crate::strategy::{run_ladder, run_zoom_in, BudgetScheme, StrategyConfig, StrategyOutcome, TraceEntry};
use crate::terrain::io::{load_grid, render_reservoir_mask, AsciiRaster, GridFormat, LoadOptions, LowerSpec};
use crate::terrain::{distance_field, Mask, TerrainGrid};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub terrain: TerrainSection,
    #[serde(default)]
    pub lower: LowerSection,
    pub eta: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub backend: Option<String>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    /// Per case, seconds.
    pub time_limit_s: Option<f64>,
    #[serde(default)]
    pub costs: CostOverrides,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default, rename = "case")]
    pub cases: Vec<CaseEntry>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TerrainSection {
    pub path: PathBuf,
    /// `esri_ascii` (default) or `csv`.
    pub format: Option<String>,
    #[serde(default)]
    pub pad_to_square: bool,
    pub csv_metadata: Option<PathBuf>,
    /// ESRI ASCII raster; nonzero cells may not be used.
    pub exclusion: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LowerSection {
    pub level: Option<f64>,
    pub tolerance: Option<f64>,
    /// ESRI ASCII raster; nonzero cells are the lower body.
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CostOverrides {
    pub embankment_unit: Option<f64>,
    pub crest_width: Option<f64>,
    pub slope_hv: Option<f64>,
    pub excavation_unit: Option<f64>,
    pub excavation_velocity: Option<f64>,
    pub lining_velocity: Option<f64>,
    pub steel_unit: Option<f64>,
    pub steel_density: Option<f64>,
    pub lining_thickness: Option<f64>,
    pub lined_fraction: Option<f64>,
    pub em_a: Option<f64>,
    pub em_b: Option<f64>,
}

impl CostOverrides {
    pub fn apply(&self, mut p: CostParams<f64>) -> CostParams<f64> {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut p.embankment_unit, self.embankment_unit);
        set(&mut p.crest_width, self.crest_width);
        set(&mut p.slope_hv, self.slope_hv);
        set(&mut p.excavation_unit, self.excavation_unit);
        set(&mut p.excavation_velocity, self.excavation_velocity);
        set(&mut p.lining_velocity, self.lining_velocity);
        set(&mut p.steel_unit, self.steel_unit);
        set(&mut p.steel_density, self.steel_density);
        set(&mut p.lining_thickness, self.lining_thickness);
        set(&mut p.lined_fraction, self.lined_fraction);
        set(&mut p.em_a, self.em_a);
        set(&mut p.em_b, self.em_b);
        p
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    pub ladder: Option<Vec<String>>,
    pub zoom_factors: Option<Vec<usize>>,
    pub clip_margin: Option<usize>,
    /// `split` (default) or `shared`.
    pub budget: Option<String>,
    /// Percent.
    pub gap_target_pct: Option<f64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub lazy: bool,
    #[serde(default)]
    pub allow_partial_ladder: bool,
    #[serde(default)]
    pub carry_level: bool,
    pub perimeter_min_neighbors: Option<u8>,
    #[serde(default)]
    pub literal_u_bound: bool,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CaseEntry {
    pub name: Option<String>,
    pub head: f64,
    pub power_mw: f64,
    pub operation_h: f64,
    #[serde(default)]
    pub zoom: bool,
    /// Overrides the file-level limit for this case.
    pub time_limit_s: Option<f64>,
}

/// One violated rule of a case file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// A parsed case file and the directory its paths are relative to.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: BatchConfig,
    pub base_dir: PathBuf,
}

pub fn parse_config(text: &str) -> Result<BatchConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

/// Reads a case file without validating it.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config = parse_config(&text)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, base_dir })
}

/// Every violated rule of the case file at `path`; empty when clean. Syntax
/// errors are reported as a single diagnostic on the field `file`.
pub fn validate_config(path: &Path) -> Result<Vec<Diagnostic>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match parse_config(&text) {
        Ok(config) => {
            let loaded = LoadedConfig {
                config,
                base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            Ok(loaded.diagnostics())
        }
        Err(e) => Ok(vec![Diagnostic {
            field: "file".into(),
            message: e.to_string(),
        }]),
    }
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(self.config.output_dir.as_deref().unwrap_or(Path::new("out")))
    }

    pub fn eta(&self) -> f64 {
        self.config.eta.unwrap_or(DEFAULT_EFFICIENCY)
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let c = &self.config;
        let mut out = Vec::new();
        let mut err = |field: String, message: String| out.push(Diagnostic { field, message });
        let positive = |v: f64| v > 0.0 && v.is_finite();

        let terrain = self.resolve(&c.terrain.path);
        if !terrain.is_file() {
            err("terrain.path".into(), format!("file not found: {}", terrain.display()));
        }
        let format = c.terrain.format.as_deref().unwrap_or("esri_ascii");
        let parsed_format = format.parse::<GridFormat>();
        if let Err(e) = &parsed_format {
            err("terrain.format".into(), e.to_string());
        }
        for (field, p) in [
            ("terrain.exclusion", &c.terrain.exclusion),
            ("terrain.csv_metadata", &c.terrain.csv_metadata),
            ("lower.mask", &c.lower.mask),
        ] {
            if let Some(p) = p {
                let p = self.resolve(p);
                if !p.is_file() {
                    err(field.into(), format!("file not found: {}", p.display()));
                }
            }
        }
        if c.lower.level.is_none() && c.lower.mask.is_none() && !matches!(parsed_format, Ok(GridFormat::Csv)) {
            err("lower".into(), "give a level or a mask for the lower body".into());
        }
        if let Some(t) = c.lower.tolerance {
            if !(t >= 0.0) {
                err("lower.tolerance".into(), format!("must be non-negative, got {t}"));
            }
        }
        if let Some(eta) = c.eta {
            if !(eta > 0.0 && eta <= 1.0) {
                err("eta".into(), format!("must lie in (0, 1], got {eta}"));
            }
        }
        if let Some(b) = &c.backend {
            if !AVAILABLE_BACKENDS.contains(&b.to_ascii_lowercase().as_str()) {
                err(
                    "backend".into(),
                    format!("unknown backend {b:?}; available: {}", AVAILABLE_BACKENDS.join(", ")),
                );
            }
        }
        if c.workers == Some(0) {
            err("workers".into(), "must be at least 1".into());
        }
        if let Some(t) = c.time_limit_s {
            if !positive(t) {
                err("time_limit_s".into(), format!("must be positive, got {t}"));
            }
        }
        if let Err(e) = c.costs.apply(CostParams::default()).validate() {
            err("costs".into(), e.to_string());
        }
        match self.strategy() {
            Ok(s) => {
                for (f, m) in s.diagnostics() {
                    err(format!("strategy.{f}"), m);
                }
            }
            Err(d) => out.extend(d),
        }
        let mut err = |field: String, message: String| out.push(Diagnostic { field, message });
        if c.cases.is_empty() {
            err("case".into(), "at least one [[case]] is required".into());
        }
        for (i, case) in c.cases.iter().enumerate() {
            let k = i + 1;
            for (name, v) in [("head", case.head), ("power_mw", case.power_mw), ("operation_h", case.operation_h)] {
                if !positive(v) {
                    err(format!("case[{k}].{name}"), format!("must be positive, got {v}"));
                }
            }
            if let Some(t) = case.time_limit_s {
                if !positive(t) {
                    err(format!("case[{k}].time_limit_s"), format!("must be positive, got {t}"));
                }
            }
        }
        out
    }

    /// Strategy settings shared by all cases.
    pub fn strategy(&self) -> std::result::Result<StrategyConfig, Vec<Diagnostic>> {
        let s = &self.config.strategy;
        let mut diags = Vec::new();
        let mut config = StrategyConfig::default();
        if let Some(names) = &s.ladder {
            config.ladder.clear();
            for (i, n) in names.iter().enumerate() {
                match n.parse::<ConnectivityLevel>() {
                    Ok(l) => config.ladder.push(l),
                    Err(e) => diags.push(Diagnostic {
                        field: format!("strategy.ladder[{i}]"),
                        message: e.to_string(),
                    }),
                }
            }
        }
        if let Some(z) = &s.zoom_factors {
            config.zoom_factors = z.clone();
        }
        config.clip_margin = s.clip_margin;
        match s.budget.as_deref() {
            None | Some("split") => config.budget = BudgetScheme::Split,
            Some("shared") => config.budget = BudgetScheme::Shared,
            Some(other) => diags.push(Diagnostic {
                field: "strategy.budget".into(),
                message: format!("unknown budget scheme {other:?}; expected split or shared"),
            }),
        }
        if let Some(g) = s.gap_target_pct {
            config.gap_target = g / 100.0;
        }
        if s.threads.is_some() {
            config.threads = s.threads;
        }
        config.lazy = s.lazy;
        config.allow_partial_ladder = s.allow_partial_ladder;
        config.carry_level = s.carry_level;
        config.model = ModelOptions {
            perimeter_min_neighbors: s.perimeter_min_neighbors.unwrap_or(1),
            literal_u_bound: s.literal_u_bound,
        };
        config.time_limit_s = self.config.time_limit_s;
        config.seed = self.config.seed;
        if diags.is_empty() {
            Ok(config)
        } else {
            Err(diags)
        }
    }

    pub fn cost_params(&self) -> CostParams<f64> {
        self.config.costs.apply(CostParams::default())
    }

    pub fn backend(&self) -> Result<Box<dyn SolverBackend>> {
        match &self.config.backend {
            Some(name) => backend_by_name(name),
            None => default_backend(),
        }
    }

    /// Loads the terrain and the exclusion mask.
    pub fn load_terrain(&self) -> Result<(TerrainGrid<f64>, Mask)> {
        let t = &self.config.terrain;
        let format: GridFormat = t.format.as_deref().unwrap_or("esri_ascii").parse()?;
        let lower = match &self.config.lower.mask {
            Some(mask) => LowerSpec::MaskFile {
                path: self.resolve(mask),
                level: self.config.lower.level,
            },
            None => LowerSpec::ByElevation {
                level: self.config.lower.level,
                tolerance: self.config.lower.tolerance.unwrap_or(0.5),
            },
        };
        let options = LoadOptions {
            pad_to_square: t.pad_to_square,
            csv_metadata: t.csv_metadata.as_ref().map(|p| self.resolve(p)),
        };
        let grid: TerrainGrid<f64> = load_grid(&self.resolve(&t.path), format, &lower, &options)?;
        let excluded = match &t.exclusion {
            Some(p) => {
                let path = self.resolve(p);
                let r = AsciiRaster::read(&path)?;
                let r = if (r.rows, r.cols) == (grid.rows(), grid.cols()) || !t.pad_to_square {
                    r
                } else {
                    pad_raster(r, grid.rows())
                };
                if (r.rows, r.cols) != (grid.rows(), grid.cols()) {
                    return Err(Error::InvalidGrid(format!(
                        "exclusion raster is {}x{} but grid is {}x{}",
                        r.rows,
                        r.cols,
                        grid.rows(),
                        grid.cols()
                    )));
                }
                Mask::from_fn(grid.rows(), grid.cols(), |c| {
                    let v = r.values[c.row * r.cols + c.col];
                    !r.is_nodata(v) && v != 0.0
                })
            }
            None => Mask::new(grid.rows(), grid.cols()),
        };
        Ok((grid, excluded))
    }

    pub fn case(&self, k: usize) -> Result<&CaseEntry> {
        k.checked_sub(1)
            .and_then(|i| self.config.cases.get(i))
            .ok_or_else(|| Error::Config(format!("case {k} not found; the file has {} cases", self.config.cases.len())))
    }

    pub fn spec(&self, case: &CaseEntry, grid: &TerrainGrid<f64>) -> Result<SitingSpec<f64>> {
        SitingSpec::new(case.power_mw, case.head, case.operation_h, self.eta(), grid.lower_elevation())
    }

    /// Full-resolution instance of case `k` (1-based).
    pub fn case_instance(&self, k: usize) -> Result<SitingInstance<f64>> {
        let case = self.case(k)?;
        let (grid, excluded) = self.load_terrain()?;
        let spec = self.spec(case, &grid)?;
        let dist = distance_field(&grid)?;
        SitingInstance::new(grid, dist, spec, self.cost_params(), &excluded)
    }

    pub fn case_name(&self, k: usize) -> String {
        self.case(k)
            .ok()
            .and_then(|c| c.name.clone())
            .unwrap_or_else(|| format!("case_{k}"))
    }
}

fn pad_raster(r: AsciiRaster, n: usize) -> AsciiRaster {
    let mut values = vec![0.0; n * n];
    for row in 0..r.rows.min(n) {
        let w = r.cols.min(n);
        values[row * n..row * n + w].copy_from_slice(&r.values[row * r.cols..row * r.cols + w]);
    }
    AsciiRaster {
        rows: n,
        cols: n,
        values,
        ..r
    }
}

/// Result of one case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub index: usize,
    pub name: String,
    pub case: CaseEntry,
    pub storage_target_m3: Option<f64>,
    /// `optimal`, `feasible`, `time_limit`, `infeasible`, `fragmented` or
    /// `error`.
    pub status: String,
    pub message: String,
    pub solution: Option<ReservoirSolution>,
    pub trace: Vec<TraceEntry>,
    pub num_vars: usize,
    pub num_rows: usize,
    pub wall_time_s: f64,
}

impl CaseReport {
    fn from_outcome(index: usize, name: String, case: CaseEntry, target: f64, out: StrategyOutcome) -> Self {
        let (status, message) = match &out.solution {
            Some(s) if !s.valid => ("fragmented".to_string(), format!("{} components", s.components)),
            Some(s) => match s.gap {
                Some(g) if g <= 1e-9 => ("optimal".to_string(), String::new()),
                _ => ("feasible".to_string(), String::new()),
            },
            None => (out.last_status().to_string(), "no incumbent".to_string()),
        };
        CaseReport {
            index,
            name,
            case,
            storage_target_m3: Some(target),
            status,
            message,
            solution: out.solution,
            trace: out.trace,
            num_vars: out.num_vars,
            num_rows: out.num_rows,
            wall_time_s: out.wall_time_s,
        }
    }

    fn error(index: usize, name: String, case: CaseEntry, e: &Error) -> Self {
        CaseReport {
            index,
            name,
            case,
            storage_target_m3: None,
            status: "error".into(),
            message: e.to_string(),
            solution: None,
            trace: Vec::new(),
            num_vars: 0,
            num_rows: 0,
            wall_time_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub cases: Vec<CaseReport>,
    pub output_dir: PathBuf,
}

/// Runs every case, writes masks, traces, solver logs and the three report
/// tables to the output directory. Cases that fail or time out are reported,
/// not fatal; configuration and I/O errors are.
pub fn run_batch(loaded: &LoadedConfig) -> Result<BatchReport> {
    let diags = loaded.diagnostics();
    if !diags.is_empty() {
        let msg: Vec<String> = diags.iter().map(ToString::to_string).collect();
        return Err(Error::Config(msg.join("; ")));
    }
    let strategy = loaded.strategy().map_err(|d| Error::Config(format!("{d:?}")))?;
    let backend = loaded.backend()?;
    let params = loaded.cost_params();
    let (grid, excluded) = loaded.load_terrain()?;
    let out_dir = loaded.output_dir();
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(loaded.config.workers.unwrap_or(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let cases: Vec<(usize, CaseEntry)> = loaded.config.cases.iter().cloned().enumerate().map(|(i, c)| (i + 1, c)).collect();
    let reports: Vec<Result<CaseReport>> = pool.install(|| {
        cases
            .par_iter()
            .map(|(k, case)| {
                run_case(loaded, *k, case, &grid, &excluded, &params, &strategy, backend.as_ref(), &out_dir)
            })
            .collect()
    });
    let cases = reports.into_iter().collect::<Result<Vec<_>>>()?;
    write_reports(&out_dir, &cases)?;
    Ok(BatchReport { cases, output_dir: out_dir })
}

#[allow(clippy::too_many_arguments)]
fn run_case(
    loaded: &LoadedConfig,
    k: usize,
    case: &CaseEntry,
    grid: &TerrainGrid<f64>,
    excluded: &Mask,
    params: &CostParams<f64>,
    strategy: &StrategyConfig,
    backend: &dyn SolverBackend,
    out_dir: &Path,
) -> Result<CaseReport> {
    let name = loaded.case_name(k);
    let mut config = strategy.clone();
    config.time_limit_s = case.time_limit_s.or(strategy.time_limit_s);
    let log = out_dir.join(format!("solver_{k}.log"));
    let _ = fs::remove_file(&log);
    config.log_path = Some(log);
    log::info!("case {k} ({name}): head {} m, {} MW, {} h", case.head, case.power_mw, case.operation_h);
    let spec = match loaded.spec(case, grid) {
        Ok(s) => s,
        Err(e) => return Ok(CaseReport::error(k, name, case.clone(), &e)),
    };
    let outcome = if case.zoom {
        run_zoom_in(grid, &spec, params, excluded, &config, backend)
    } else {
        distance_field(grid)
            .and_then(|dist| SitingInstance::new(grid.clone(), dist, spec, *params, excluded))
            .and_then(|inst| run_ladder(&inst, &config, backend))
    };
    let report = match outcome {
        Ok(out) => CaseReport::from_outcome(k, name, case.clone(), spec.vol_min, out),
        Err(e @ (Error::Io { .. } | Error::Config(_))) => return Err(e),
        Err(e) => {
            log::warn!("case {k} failed: {e}");
            CaseReport::error(k, name, case.clone(), &e)
        }
    };
    write_trace(&out_dir.join(format!("trace_{k}.log")), &report)?;
    if let Some(sol) = &report.solution {
        let path = out_dir.join(format!("case_{k}_mask.asc"));
        render_reservoir_mask(grid, &sol.perimeter, &sol.interior).write(&path)?;
    }
    Ok(report)
}

fn write_trace(path: &Path, report: &CaseReport) -> Result<()> {
    let mut text = String::from(TraceEntry::CSV_HEADER);
    text.push('\n');
    for t in &report.trace {
        text.push_str(&t.csv_row());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|v| format!("{:.digits$}", v + 0.0)).unwrap_or_default()
}

pub const PHYSICAL_HEADER: &[&str] = &[
    "case",
    "name",
    "head_m",
    "power_mw",
    "operation_h",
    "zoom",
    "storage_target_hm3",
    "storage_hm3",
    "area_ha",
    "embankment_cells",
    "embankment_length_m",
    "embankment_length_diagonal_m",
    "embankment_volume_m3",
    "distance_m",
];

pub const COST_HEADER: &[&str] = &[
    "case",
    "name",
    "embankment_musd",
    "conveyance_musd",
    "equipment_musd",
    "total_musd",
    "embankment_usd",
    "conveyance_excavation_usd",
    "conveyance_lining_usd",
    "equipment_usd",
    "total_usd",
];

pub const SOLVER_HEADER: &[&str] = &[
    "case",
    "name",
    "status",
    "level",
    "level_code",
    "components",
    "valid",
    "num_vars",
    "num_rows",
    "wall_time_s",
    "gap_pct",
    "message",
];

/// Writes `report_physical.csv`, `report_costs.csv` and `report_solver.csv`.
/// Every figure is recomputed from the masks.
pub fn write_reports(dir: &Path, cases: &[CaseReport]) -> Result<()> {
    let mut cases: Vec<&CaseReport> = cases.iter().collect();
    cases.sort_by_key(|c| c.index);
    let physical = cases
        .iter()
        .map(|c| {
            let m = c.solution.as_ref().map(|s| s.metrics);
            vec![
                c.index.to_string(),
                c.name.clone(),
                c.case.head.to_string(),
                c.case.power_mw.to_string(),
                c.case.operation_h.to_string(),
                c.case.zoom.to_string(),
                fmt_opt(c.storage_target_m3.map(|v| v / 1e6), 3),
                fmt_opt(m.map(|m| m.storage_m3 / 1e6), 3),
                fmt_opt(m.map(|m| m.area_ha), 2),
                m.map(|m| m.embankment_cells.to_string()).unwrap_or_default(),
                fmt_opt(m.map(|m| m.embankment_length_m), 1),
                fmt_opt(m.map(|m| m.embankment_length_diagonal_m), 1),
                fmt_opt(m.map(|m| m.embankment_volume_m3), 1),
                fmt_opt(m.map(|m| m.distance_m), 1),
            ]
        })
        .collect();
    write_table(&dir.join("report_physical.csv"), PHYSICAL_HEADER, physical)?;
    let costs = cases
        .iter()
        .map(|c| {
            let k = c.solution.as_ref().map(|s| s.costs);
            vec![
                c.index.to_string(),
                c.name.clone(),
                fmt_opt(k.map(|k| k.embankment / 1e6), 0),
                fmt_opt(k.map(|k| k.conveyance() / 1e6), 0),
                fmt_opt(k.map(|k| k.equipment / 1e6), 0),
                fmt_opt(k.map(|k| k.total / 1e6), 0),
                fmt_opt(k.map(|k| k.embankment), 2),
                fmt_opt(k.map(|k| k.conveyance_excavation), 2),
                fmt_opt(k.map(|k| k.conveyance_lining), 2),
                fmt_opt(k.map(|k| k.equipment), 2),
                fmt_opt(k.map(|k| k.total), 2),
            ]
        })
        .collect();
    write_table(&dir.join("report_costs.csv"), COST_HEADER, costs)?;
    let solver = cases
        .iter()
        .map(|c| {
            let s = c.solution.as_ref();
            vec![
                c.index.to_string(),
                c.name.clone(),
                c.status.clone(),
                s.map(|s| s.level.name().to_string()).unwrap_or_default(),
                s.map(|s| s.level.index().to_string()).unwrap_or_default(),
                s.map(|s| s.components.to_string()).unwrap_or_default(),
                s.map(|s| s.valid.to_string()).unwrap_or_default(),
                c.num_vars.to_string(),
                c.num_rows.to_string(),
                format!("{:.2}", c.wall_time_s),
                fmt_opt(s.and_then(|s| s.gap).map(|g| g * 100.0), 2),
                c.message.clone(),
            ]
        })
        .collect();
    write_table(&dir.join("report_solver.csv"), SOLVER_HEADER, solver)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
        output_dir = "out"
        [terrain]
        path = "dem.asc"
        [lower]
        level = 100
        [strategy]
        ladder = ["none", "tsp"]
        gap_target_pct = 1
        [[case]]
        head = 450
        power_mw = 10
        operation_h = 2
        [[case]]
        name = "zoomed"
        head = 400
        power_mw = 10
        operation_h = 2
        zoom = true
    "#;

    fn loaded(text: &str, dir: &Path) -> LoadedConfig {
        LoadedConfig {
            config: parse_config(text).unwrap(),
            base_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn parses_sample() {
        let dir = tempfile::tempdir().unwrap();
        let l = loaded(SAMPLE, dir.path());
        assert_eq!(l.config.cases.len(), 2);
        assert!(l.config.cases[1].zoom);
        let s = l.strategy().unwrap();
        assert_eq!(s.ladder, [ConnectivityLevel::None, ConnectivityLevel::Tsp]);
        assert_eq!(s.gap_target, 0.01);
        assert_eq!(l.case_name(2), "zoomed");
        assert_eq!(l.case_name(1), "case_1");
        assert!(l.case(3).is_err());
    }

    #[test]
    fn diagnostics_name_fields() {
        let dir = tempfile::tempdir().unwrap();
        let text = SAMPLE.replace("head = 400", "head = -5").replace("output_dir", "backend = \"cplex\"\noutput_dir");
        let l = loaded(&text, dir.path());
        let fields: Vec<String> = l.diagnostics().into_iter().map(|d| d.field).collect();
        assert_eq!(fields, ["terrain.path", "backend", "case[2].head"]);
        let d = l.diagnostics();
        assert!(d[1].message.contains("available: highs"));
    }

    #[test]
    fn unknown_keys_and_levels_are_rejected() {
        assert!(parse_config(&SAMPLE.replace("zoom = true", "zoom = true\nspeed = 3")).is_err());
        let dir = tempfile::tempdir().unwrap();
        let l = loaded(&SAMPLE.replace("\"tsp\"]", "\"flow\"]"), dir.path());
        assert!(l.diagnostics().iter().any(|d| d.field == "strategy.ladder[1]"));
    }

    #[test]
    fn cost_overrides_apply() {
        let o = CostOverrides {
            embankment_unit: Some(7.0),
            ..Default::default()
        };
        let p = o.apply(CostParams::default());
        assert_eq!(p.embankment_unit, 7.0);
        assert_eq!(p.crest_width, CostParams::<f64>::default().crest_width);
    }
}
