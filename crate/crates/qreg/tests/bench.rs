use std::path::Path;

use qreg::bench::{
    grid_search, read_results_csv, run_benchmark, ExperimentPlan, Solver, GRID_CSV, RESULTS_CSV,
    RESULTS_JSON, TRACES_JSON,
};
use qreg::report::{report, ReportError, MISSING};
use qreg_core::{AdaptiveConfig, SaConfig};

fn small_plan(out: &Path) -> ExperimentPlan {
    ExperimentPlan {
        feature_sizes: vec![3, 4],
        n_rows: 2000,
        seeds: vec![1, 2],
        solvers: vec![Solver::Cf, Solver::Sgd, Solver::Sa, Solver::SaAda],
        sa: SaConfig {
            num_reads: 50,
            sweeps: 100,
            ..Default::default()
        },
        adaptive: AdaptiveConfig {
            n_iter: 5,
            ..Default::default()
        },
        output_dir: out.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn results_files_and_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let plan = small_plan(dir.path());
    let out = run_benchmark(&plan).unwrap();
    assert_eq!(out.failed(), 0);
    assert_eq!(out.rows.len(), 2 * 2 * 4);
    for f in [RESULTS_CSV, RESULTS_JSON, TRACES_JSON] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let header = std::fs::read_to_string(dir.path().join(RESULTS_CSV)).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        "features,solver,seed,r2,tts_ms,extra_json"
    );
    assert_eq!(
        read_results_csv(&dir.path().join(RESULTS_CSV)).unwrap(),
        out.rows
    );

    for r in &out.rows {
        assert!(r.r2.unwrap() <= 1.0);
        assert!(r.tts_ms > 0.0);
    }
    for r in out.rows.iter().filter(|r| r.solver == Solver::SaAda) {
        let fixed = out
            .rows
            .iter()
            .find(|s| s.solver == Solver::Sa && s.features == r.features && s.seed == r.seed)
            .unwrap();
        assert!(r.tts_ms >= fixed.tts_ms);
        assert!(r.r2.unwrap() >= fixed.r2.unwrap());
    }
    for (f, s) in [(3, 1), (4, 2)] {
        let get = |solver| {
            out.rows
                .iter()
                .find(|r| r.features == f && r.seed == s && r.solver == solver)
                .unwrap()
                .r2
                .unwrap()
        };
        assert!((get(Solver::Cf) - get(Solver::Sgd)).abs() <= 1e-3);
    }
}

#[test]
fn reruns_reproduce_r2() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_benchmark(&small_plan(a.path())).unwrap();
    let rb = run_benchmark(&small_plan(b.path())).unwrap();
    let r2 = |rows: &[qreg::bench::ResultRow]| rows.iter().map(|r| r.r2).collect::<Vec<_>>();
    assert_eq!(r2(&ra.rows), r2(&rb.rows));
}

#[test]
fn file_backed_data_gives_same_results() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mem = run_benchmark(&small_plan(a.path())).unwrap();
    let mut plan = small_plan(b.path());
    plan.data_dir = Some(b.path().join("data"));
    let disk = run_benchmark(&plan).unwrap();
    for (m, d) in mem.rows.iter().zip(&disk.rows) {
        assert!(
            (m.r2.unwrap() - d.r2.unwrap()).abs() < 1e-9,
            "{m:?} vs {d:?}"
        );
    }
}

#[test]
fn failing_solver_becomes_error_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = small_plan(dir.path());
    plan.solvers = vec![Solver::Cf, Solver::Ext];
    plan.external_cmd = Some("exit 1".into());
    let out = run_benchmark(&plan).unwrap();
    assert_eq!(out.rows.len(), 2 * 2 * 2);
    assert_eq!(out.failed(), 4);
    assert!(out
        .rows
        .iter()
        .filter(|r| r.solver == Solver::Ext)
        .all(|r| r.error().is_some()));

    let rep = report(&dir.path().join(RESULTS_CSV)).unwrap();
    assert_eq!(rep.matrix.len(), 2);
    assert!(rep.table.contains(MISSING));
    let plot = std::fs::read_to_string(&rep.plot_path).unwrap();
    assert_eq!(plot.lines().count(), 1 + 4);
    assert!(!plot.contains("ext"));
}

#[test]
fn external_solvers_need_a_command() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = small_plan(dir.path());
    plan.solvers = vec![Solver::ExtAda];
    assert!(run_benchmark(&plan).is_err());
    plan.solvers.clear();
    assert!(run_benchmark(&plan).is_err());
}

#[test]
fn report_errors_are_structured() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert!(matches!(report(&missing), Err(ReportError::Missing(_))));
    let bad = dir.path().join(RESULTS_CSV);
    std::fs::write(
        &bad,
        "features,solver,seed,r2,tts_ms,extra_json\n5,warp,0,1,1,{}\n",
    )
    .unwrap();
    assert!(matches!(report(&bad), Err(ReportError::Corrupt { .. })));
}

#[test]
fn grid_search_prefers_gentle_rates() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = small_plan(dir.path());
    plan.feature_sizes = vec![6];
    plan.seeds = vec![1, 2, 3];
    plan.sa.num_reads = 100;
    plan.sa.sweeps = 200;
    plan.adaptive.n_iter = 15;
    plan.adaptive.plateau_tol = 0.0;
    let out = grid_search(&plan, &[2.0, 100.0], &[2.0]).unwrap();
    assert_eq!(out.cells.len(), 2);
    assert_eq!(out.best, (2.0, 2.0));
    let grid = std::fs::read_to_string(dir.path().join(GRID_CSV)).unwrap();
    assert_eq!(grid.lines().count(), 3);

    let single = grid_search(&plan, &[3.0], &[1.5]).unwrap();
    assert_eq!(single.best, (3.0, 1.5));
}
