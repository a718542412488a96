use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use phs_core::batch::{load_config, run_batch, validate_config};
use phs_core::connectivity::ConnectivityLevel;
use phs_core::model::build_model;
use phs_core::solve::{oracle_enumerate, write_model, ModelFormat, OracleOptions};
use phs_core::strategy::run_ladder;
use phs_core::terrain::io::render_reservoir_mask;

#[derive(Parser)]
#[command(name = "phs-siting", version, about = "Minimum-cost upper reservoir siting for pumped-hydro plants")]
#[command(after_help = "The solver backend can be chosen with the PHS_SITING_BACKEND environment variable.")]
struct Cli {
    /// More log output; repeat for debug level.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every case of a case file and write the reports.
    Run { config: PathBuf },
    /// Check a case file; exits 0 only when it is clean.
    Validate { config: PathBuf },
    /// Write the full-resolution model of one case to a file.
    Export {
        config: PathBuf,
        /// 1-based case index.
        #[arg(long)]
        case: usize,
        /// mps, mps_fixed or lp.
        #[arg(long, default_value = "mps")]
        format: String,
        /// none, hv_planes, hv_diag_planes or tsp.
        #[arg(long, default_value = "tsp")]
        level: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Enumerate every reservoir of a small case and compare with the solver.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        case: usize,
        /// Reject disconnected reservoirs.
        #[arg(long)]
        connected: bool,
        /// Write the enumerated optimum as a raster.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config } => run(&config),
        Command::Validate { config } => validate(&config),
        Command::Export {
            config,
            case,
            format,
            level,
            output,
        } => export(&config, case, &format, &level, output),
        Command::Oracle {
            config,
            case,
            connected,
            output,
        } => oracle(&config, case, connected, output),
    }
}

fn validate(path: &Path) -> Result<ExitCode> {
    let diags = validate_config(path)?;
    if diags.is_empty() {
        println!("{}: ok", path.display());
        return Ok(ExitCode::SUCCESS);
    }
    for d in &diags {
        println!("{d}");
    }
    Ok(ExitCode::FAILURE)
}

fn run(path: &Path) -> Result<ExitCode> {
    let loaded = load_config(path)?;
    let diags = loaded.diagnostics();
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("{d}");
        }
        return Ok(ExitCode::FAILURE);
    }
    let report = run_batch(&loaded)?;
    for c in &report.cases {
        let cost = c
            .solution
            .as_ref()
            .map(|s| format!("{:.1} M$", s.costs.total / 1e6))
            .unwrap_or_else(|| "-".into());
        println!("case {} ({}): {} {} {}", c.index, c.name, c.status, cost, c.message);
    }
    println!("reports written to {}", report.output_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn export(path: &Path, case: usize, format: &str, level: &str, output: Option<PathBuf>) -> Result<ExitCode> {
    let loaded = load_config(path)?;
    let format: ModelFormat = format.parse()?;
    let level: ConnectivityLevel = level.parse()?;
    let inst = loaded.case_instance(case)?;
    let strategy = loaded
        .strategy()
        .map_err(|d| anyhow::anyhow!("{}", d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")))?;
    let problem = build_model(&inst, level, &strategy.model)?;
    let output = match output {
        Some(p) => p,
        None => {
            let dir = loaded.output_dir();
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            dir.join(format!("case_{case}_{}.{}", level.name(), format.extension()))
        }
    };
    write_model(&problem, format, &output)?;
    println!(
        "{}: {} variables, {} rows",
        output.display(),
        problem.num_vars(),
        problem.num_rows()
    );
    Ok(ExitCode::SUCCESS)
}

fn oracle(path: &Path, case: usize, connected: bool, output: Option<PathBuf>) -> Result<ExitCode> {
    let loaded = load_config(path)?;
    let inst = loaded.case_instance(case)?;
    let strategy = loaded
        .strategy()
        .map_err(|d| anyhow::anyhow!("{}", d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")))?;
    let opts = OracleOptions {
        level: strategy.ladder.last().copied().unwrap_or(ConnectivityLevel::Tsp),
        require_connected: connected,
        perimeter_min_neighbors: strategy.model.perimeter_min_neighbors,
        ..OracleOptions::default()
    };
    let result = oracle_enumerate(&inst, &opts)?;
    println!(
        "enumerated {} configurations, {} feasible",
        result.configurations, result.feasible
    );
    let Some(best) = result.best else {
        println!("oracle: no feasible reservoir");
        return Ok(ExitCode::SUCCESS);
    };
    println!(
        "oracle: {:.2} $ with {} perimeter and {} interior cells, link at ({}, {})",
        best.cost,
        best.perimeter.count(),
        best.interior.count(),
        best.link.row,
        best.link.col
    );
    if let Some(out) = &output {
        let perimeter: Vec<_> = best.perimeter.cells().collect();
        let interior: Vec<_> = best.interior.cells().collect();
        render_reservoir_mask(&inst.grid, &perimeter, &interior).write(out)?;
    }
    let mut config = strategy.clone();
    config.ladder = vec![opts.level];
    config.allow_partial_ladder = true;
    let backend = loaded.backend()?;
    let outcome = run_ladder(&inst, &config, backend.as_ref())?;
    match outcome.solution {
        Some(s) => {
            let rel = (s.costs.total - best.cost).abs() / best.cost.abs().max(1.0);
            println!("solver ({}): {:.2} $, relative difference {rel:.2e}", opts.level.name(), s.costs.total);
            if rel > 1e-6 && !connected {
                bail!("solver and oracle disagree");
            }
        }
        None => println!("solver ({}): {}", opts.level.name(), outcome.last_status()),
    }
    Ok(ExitCode::SUCCESS)
}
