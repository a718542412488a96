use phs_core::connectivity::ConnectivityLevel;
use phs_core::costing::CostParams;
use phs_core::model::{build_model, extract_solution, ModelOptions, SitingInstance};
use phs_core::sizing::SitingSpec;
use phs_core::solve::{self, oracle_enumerate, solve_model_file, write_model, HighsBackend, ModelFormat, OracleOptions, SolveLimits, SolveStatus};
use phs_core::synthetic;
use phs_core::terrain::{distance_field, Mask, TerrainGrid};

fn pit(vol_min: f64) -> SitingInstance<f64> {
    let mut rows = vec![vec![600.0; 5]; 5];
    rows[2][2] = 500.0;
    rows[4][0] = 100.0;
    let grid = TerrainGrid::from_rows(34.0, &rows, 100.0, 0.5).unwrap();
    let dist = distance_field(&grid).unwrap();
    let mut spec = SitingSpec::new(1.0, 450.0, 1.0, 0.667, 100.0).unwrap();
    spec.vol_min = vol_min;
    SitingInstance::new(grid, dist, spec, CostParams::default(), &Mask::new(5, 5)).unwrap()
}

#[test]
fn pit_optimum_matches_oracle() {
    let inst = pit(20_000.0);
    for level in ConnectivityLevel::ALL {
        let p = build_model(&inst, level, &ModelOptions::default()).unwrap();
        let out = solve::solve(&p, &HighsBackend, &SolveLimits::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        let sol = extract_solution(&p, out.values.as_ref().unwrap(), &inst).unwrap();
        let oracle = oracle_enumerate(&inst, &OracleOptions { level, ..Default::default() }).unwrap();
        let best = oracle.best.unwrap();
        let obj = out.objective.unwrap();
        assert!((obj - best.cost).abs() <= 1e-6 * best.cost, "{level}: {obj} vs {}", best.cost);
        assert!((sol.costs.total - obj).abs() <= 1e-6 * obj);
        assert_eq!(out.gap, Some(0.0));
    }
}

#[test]
fn tour_infeasible_micro_terrain() {
    // Shapes holding enough water exist, but none has a perimeter tour.
    let inst = synthetic::random_micro(3, 6, 6).instance().unwrap();
    let loose = build_model(&inst, ConnectivityLevel::None, &ModelOptions::default()).unwrap();
    let out = solve::solve(&loose, &HighsBackend, &SolveLimits::default()).unwrap();
    assert_eq!(out.status, SolveStatus::Optimal);
    let p = build_model(&inst, ConnectivityLevel::Tsp, &ModelOptions::default()).unwrap();
    let out = solve::solve(&p, &HighsBackend, &SolveLimits::default()).unwrap();
    assert_eq!(out.status, SolveStatus::Infeasible);
    assert!(out.values.is_none());
    assert!(oracle_enumerate(&inst, &OracleOptions::default()).unwrap().best.is_none());
}

#[test]
fn time_limit_is_reported() {
    let inst = synthetic::rolling_hills(60, 60, 3, 4.0e5).instance().unwrap();
    let p = build_model(&inst, ConnectivityLevel::Tsp, &ModelOptions::default()).unwrap();
    let limits = SolveLimits { time_limit_s: Some(0.05), ..Default::default() };
    let out = solve::solve(&p, &HighsBackend, &limits).unwrap();
    assert!(matches!(out.status, SolveStatus::TimeLimit | SolveStatus::Feasible), "{:?}", out.status);
    assert!(out.wall_time_s < 30.0);
    if let (Some(inc), Some(b)) = (out.objective, out.bound) {
        assert!(b <= inc + 1e-6 * inc.abs());
    }
}

#[test]
fn logs_go_to_file() {
    let inst = pit(20_000.0);
    let p = build_model(&inst, ConnectivityLevel::Tsp, &ModelOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("highs.log");
    let limits = SolveLimits { log_path: Some(log.clone()), ..Default::default() };
    solve::solve(&p, &HighsBackend, &limits).unwrap();
    assert!(std::fs::read_to_string(log).unwrap().contains("HiGHS"));
}

#[test]
fn file_round_trip_through_highs_reader() {
    let inst = pit(20_000.0);
    let p = build_model(&inst, ConnectivityLevel::Tsp, &ModelOptions::default()).unwrap();
    let direct = solve::solve(&p, &HighsBackend, &SolveLimits::default()).unwrap().objective.unwrap();
    let dir = tempfile::tempdir().unwrap();
    for fmt in [ModelFormat::MpsFree, ModelFormat::MpsFixed, ModelFormat::Lp] {
        let path = dir.path().join(format!("m.{}", fmt.extension()));
        write_model(&p, fmt, &path).unwrap();
        let (out, named) = solve_model_file(&path, &SolveLimits::default()).unwrap();
        let obj = out.objective.unwrap();
        assert_eq!(named.len(), p.num_vars());
        assert!((obj - direct).abs() <= 1e-6 * direct, "{fmt:?}: {obj} vs {direct}");
    }
}

