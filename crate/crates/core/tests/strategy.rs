use phs_core::connectivity::ConnectivityLevel;
use phs_core::model::{build_model, ModelOptions};
use phs_core::solve::{self, HighsBackend, SolveLimits, SolveStatus};
use phs_core::strategy::{run_ladder, run_zoom_in, StrategyConfig};
use phs_core::synthetic;

fn levels(trace: &[phs_core::strategy::TraceEntry]) -> Vec<(ConnectivityLevel, String)> {
    trace.iter().map(|t| (t.level, t.note.clone())).collect()
}

#[test]
fn pit_stops_at_first_level() {
    let inst = synthetic::pit().instance().unwrap();
    let out = run_ladder(&inst, &StrategyConfig::default(), &HighsBackend).unwrap();
    let sol = out.solution.unwrap();
    assert!(sol.valid);
    assert_eq!(sol.level, ConnectivityLevel::None);
    assert_eq!(out.trace.len(), 1);
}

#[test]
fn two_basins_need_planes() {
    let inst = synthetic::two_basins().instance().unwrap();
    let out = run_ladder(&inst, &StrategyConfig::default(), &HighsBackend).unwrap();
    let sol = out.solution.unwrap();
    assert!(sol.valid);
    assert_eq!(sol.components, 1);
    assert_eq!(sol.level, ConnectivityLevel::HvPlanes);
    assert_eq!(out.trace[0].note, "fragmented");
    assert_eq!(out.trace[0].components, 2);
    assert!(sol.costs.total > out.trace[0].cost.unwrap());
}

#[test]
fn diagonal_blobs_need_diagonal_planes() {
    let inst = synthetic::diagonal_blobs().instance().unwrap();
    for lazy in [false, true] {
        let config = StrategyConfig { lazy, ..Default::default() };
        let out = run_ladder(&inst, &config, &HighsBackend).unwrap();
        let sol = out.solution.unwrap();
        assert!(sol.valid, "lazy={lazy}");
        assert_eq!(sol.level, ConnectivityLevel::HvDiagPlanes, "{:?}", levels(&out.trace));
        let fragmented: Vec<_> = out.trace.iter().filter(|t| t.note == "fragmented").map(|t| t.level).collect();
        assert_eq!(fragmented, [ConnectivityLevel::None, ConnectivityLevel::HvPlanes]);
    }
}

#[test]
fn lazy_planes_match_eager_optimum() {
    for s in [synthetic::two_basins(), synthetic::diagonal_blobs(), synthetic::random_micro(4, 5, 3)] {
        let inst = s.instance().unwrap();
        for level in [ConnectivityLevel::HvPlanes, ConnectivityLevel::HvDiagPlanes] {
            let ladder = vec![level];
            let eager = StrategyConfig { ladder: ladder.clone(), allow_partial_ladder: true, ..Default::default() };
            let lazy = StrategyConfig { lazy: true, ..eager.clone() };
            let cost = |c: &StrategyConfig| {
                let out = run_ladder(&inst, c, &HighsBackend).unwrap();
                out.trace.last().unwrap().cost.unwrap()
            };
            let (a, b) = (cost(&eager), cost(&lazy));
            assert!((a - b).abs() <= 1e-6 * a, "{} {level}: {a} vs {b}", s.name);
        }
    }
}

#[test]
fn exhausted_ladder_returns_invalid_best() {
    let inst = synthetic::two_basins().instance().unwrap();
    let config = StrategyConfig {
        ladder: vec![ConnectivityLevel::None],
        allow_partial_ladder: true,
        ..Default::default()
    };
    let sol = run_ladder(&inst, &config, &HighsBackend).unwrap().solution.unwrap();
    assert!(!sol.valid);
    assert_eq!(sol.components, 2);
}

#[test]
fn ladder_costs_are_monotone_on_micro_terrains() {
    for seed in 0..8 {
        let inst = synthetic::random_micro(4, 4, seed).instance().unwrap();
        let mut prev = f64::NEG_INFINITY;
        for level in ConnectivityLevel::ALL {
            let p = build_model(&inst, level, &ModelOptions::default()).unwrap();
            let out = solve::solve(&p, &HighsBackend, &SolveLimits::default()).unwrap();
            let Some(obj) = out.objective else {
                assert_eq!(out.status, SolveStatus::Infeasible);
                prev = f64::INFINITY;
                continue;
            };
            assert!(obj >= prev - 1e-6 * obj.abs(), "seed {seed} {level}");
            prev = obj;
        }
    }
}

#[test]
fn zoom_in_equals_direct_on_micro_terrains() {
    for seed in 0..6 {
        let s = synthetic::random_micro(4, 4, seed);
        let inst = s.instance().unwrap();
        let config = StrategyConfig::default();
        let direct = run_ladder(&inst, &config, &HighsBackend).unwrap().solution;
        let zoom = run_zoom_in(&s.grid, &s.spec, &inst.params, &s.excluded, &config, &HighsBackend).unwrap();
        match (direct, zoom.solution) {
            (Some(d), Some(z)) => {
                assert!((d.costs.total - z.costs.total).abs() <= 1e-6 * d.costs.total, "seed {seed}");
                assert!(z.check_on(&inst, &config.model).is_ok());
            }
            (None, None) => {}
            (d, z) => panic!("seed {seed}: direct {:?} zoom {:?}", d.map(|s| s.costs.total), z.map(|s| s.costs.total)),
        }
    }
}

#[test]
fn zoom_in_on_hills_is_feasible_at_full_resolution() {
    let s = synthetic::rolling_hills(48, 48, 5, 3.0e5);
    let inst = s.instance().unwrap();
    let config = StrategyConfig { time_limit_s: Some(20.0), ..Default::default() };
    let out = run_zoom_in(&s.grid, &s.spec, &inst.params, &s.excluded, &config, &HighsBackend).unwrap();
    for t in &out.trace {
        println!("{}", t.csv_row());
    }
    let sol = out.solution.unwrap();
    sol.check_on(&inst, &config.model).unwrap();
    assert!(out.trace.iter().any(|t| t.factor > 1 && t.cost.is_some()));
    assert_eq!(out.trace.last().unwrap().factor, 1);
}

#[test]
fn solver_log_collects_every_solve() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("case.log");
    let inst = synthetic::two_basins().instance().unwrap();
    let config = StrategyConfig { log_path: Some(log.clone()), ..Default::default() };
    run_ladder(&inst, &config, &HighsBackend).unwrap();
    let text = std::fs::read_to_string(log).unwrap();
    assert_eq!(text.matches("==== factor 1 level").count(), 2);
    assert!(!dir.path().join("case.part.log").exists());
}

#[test]
fn carried_level_keeps_micro_optimum() {
    let config = StrategyConfig { carry_level: true, ..Default::default() };
    for seed in 0..8 {
        let s = synthetic::random_micro(5, 5, seed);
        let inst = s.instance().unwrap();
        let direct = run_ladder(&inst, &config, &HighsBackend).unwrap().solution.map(|s| s.costs.total);
        let zoom = run_zoom_in(&s.grid, &s.spec, &inst.params, &s.excluded, &config, &HighsBackend)
            .unwrap()
            .solution
            .map(|s| s.costs.total);
        match (direct, zoom) {
            (Some(d), Some(z)) => assert!((d - z).abs() <= 1e-6 * d, "seed {seed}: {d} vs {z}"),
            (d, z) => assert_eq!(d.is_some(), z.is_some(), "seed {seed}"),
        }
    }
}
