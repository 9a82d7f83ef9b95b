mod common;

use elastica_core::energy::{DiscreteEnergy, QuarticBump, RegularizationParams};
use elastica_core::experiments::{
    classify_nodal, initial_guess, run_experiment, write_runs_csv, ExperimentConfig, ExperimentRecord, InitialGuess,
    RunRecord, RunRow, RUN_CSV_HEADER,
};
use elastica_core::grid::PeriodicGrid;
use elastica_core::obstacles::{obstacle_constants, Obstacle};
use elastica_core::optimizer::{minimize_bfgs, stopping_criterion};
use proptest::prelude::*;
use std::sync::{Arc, OnceLock};

/// A few coarse cells of two presets, shared by the tests below.
fn small_record() -> &'static ExperimentRecord {
    static RECORD: OnceLock<ExperimentRecord> = OnceLock::new();
    RECORD.get_or_init(|| {
        let mut config = ExperimentConfig::preset("psi1-p2").unwrap();
        config.ns = vec![48, 96];
        config.guesses.retain(|g| ["A", "B", "F"].contains(&g.label.as_str()));
        run_experiment(&config).unwrap()
    })
}

fn peak_record() -> &'static ExperimentRecord {
    static RECORD: OnceLock<ExperimentRecord> = OnceLock::new();
    RECORD.get_or_init(|| {
        let mut config = ExperimentConfig::preset("psi2-p1").unwrap();
        config.ns = vec![50, 100];
        run_experiment(&config).unwrap()
    })
}

fn records() -> [&'static ExperimentRecord; 2] {
    [small_record(), peak_record()]
}

#[test]
fn empty_record_writes_header_only() {
    let mut out = Vec::new();
    write_runs_csv(&[], &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), format!("{}\n", RUN_CSV_HEADER.join(",")));
}

#[test]
fn one_run_is_one_matching_row() {
    let run: &RunRecord = &small_record().runs[0];
    let mut out = Vec::new();
    write_runs_csv(std::slice::from_ref(run), &mut out).unwrap();
    let mut reader = csv::Reader::from_reader(out.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, RUN_CSV_HEADER);
    let rows: Vec<RunRow> = reader.deserialize().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row, &RunRow::from(run));
    assert_eq!(row.n, run.n);
    assert_eq!(row.total, run.energy.total);
    assert_eq!(row.bending, run.energy.bending);
    assert_eq!(row.iterations, run.iterations);
    assert_eq!(row.guess, run.guess.to_string());
}

#[test]
fn json_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    for record in records() {
        let path = dir.path().join("record.json");
        record.save_json(&path).unwrap();
        assert_eq!(&ExperimentRecord::load_json(&path).unwrap(), record);
    }
}

#[test]
fn curves_are_dumped_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let record = small_record();
    record.dump_curves(dir.path()).unwrap();
    let run = &record.runs[1];
    let path = dir.path().join(format!("{}_1_N{}.csv", run.label, run.n));
    let mut reader = csv::Reader::from_path(path).unwrap();
    let rows: Vec<(f64, f64, f64)> = reader.deserialize().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.len(), run.n);
    assert_eq!(rows[3].1, run.curve.values()[3]);
    assert_eq!(rows[3].2, run.psi[3]);
}

#[test]
fn reruns_are_bit_identical() {
    let again = run_experiment(&small_record().config).unwrap();
    for (a, b) in small_record().runs.iter().zip(&again.runs) {
        let mut b = b.clone();
        b.wall_seconds = a.wall_seconds;
        assert_eq!(a, &b);
    }
}

#[test]
fn converged_runs_meet_the_stopping_rule_post_hoc() {
    for record in records() {
        let config = &record.config;
        let obstacle = Obstacle::from_name(&config.obstacle).unwrap();
        for r in record.runs.iter().filter(|r| r.converged) {
            let grid = PeriodicGrid::new(r.n).unwrap();
            let reg = RegularizationParams::new(r.delta, r.rho).unwrap();
            let energy = DiscreteEnergy::new(grid, &obstacle, config.params, reg, Arc::new(QuarticBump));
            let mut g = vec![0.0; r.n];
            let e = energy.value_and_gradient(r.curve.values(), &mut g);
            assert!(stopping_criterion(&g, e, &config.options) <= config.options.tolerance);
        }
    }
}

#[test]
fn converged_runs_stay_bounded() {
    let c0 = 1.0;
    for record in records() {
        let config = &record.config;
        let obstacle = Obstacle::from_name(&config.obstacle).unwrap();
        let k = obstacle_constants(&obstacle, &config.params);
        let p = config.params;
        for r in record.runs.iter().filter(|r| r.converged) {
            let adhesion_cap = 4.0 * p.gamma * (k.tension_of_psi / p.sigma + c0);
            let bound = 1.0 + p.sigma + obstacle.sup_norm() + r.delta + adhesion_cap;
            assert!(r.sup_norm <= bound, "{} N = {}", r.label, r.n);
            assert!(r.energy.adhesion <= adhesion_cap, "{} N = {}", r.label, r.n);
        }
    }
}

#[test]
fn converged_minimizers_do_not_move_again() {
    let record = small_record();
    let config = &record.config;
    let obstacle = Obstacle::from_name(&config.obstacle).unwrap();
    for r in record.runs.iter().filter(|r| r.converged) {
        let grid = PeriodicGrid::new(r.n).unwrap();
        let reg = RegularizationParams::new(r.delta, r.rho).unwrap();
        let energy = DiscreteEnergy::new(grid, &obstacle, config.params, reg, Arc::new(QuarticBump));
        let again = minimize_bfgs(&r.curve, &energy, &config.options).unwrap();
        assert!(again.converged);
        assert_eq!(again.iterations, 0);
    }
}

#[test]
fn presets_reach_their_intended_shapes_on_coarse_grids() {
    for r in &small_record().runs {
        assert!(r.converged, "{} N = {}", r.label, r.n);
        assert!(r.matches, "{} N = {}", r.label, r.n);
    }
    let table = small_record().table();
    assert_eq!(table.global, vec![Some("F".to_string()); 2]);
}

#[test]
fn guesses_respect_the_obstacle() {
    let grid = PeriodicGrid::new(96).unwrap();
    let reg = RegularizationParams::new(grid.h(), grid.h() / 100.0).unwrap();
    let common = ["top", "full", "tent:0.2:0.0625", "spike:0.5", "random:3:0.01"];
    // bumps and dips need several crests
    let crested = ["bump:2:0.1", "dips:101"];
    for (name, extra) in [("sin24", &crested[..]), ("peak", &[][..])] {
        let obstacle = Obstacle::from_name(name).unwrap();
        let psi: Vec<f64> = grid.nodes().map(|x| obstacle.value(x)).collect();
        for g in common.iter().chain(extra) {
            let guess: InitialGuess = g.parse().unwrap();
            let curve = initial_guess(&guess, grid, &obstacle, &reg).unwrap();
            assert!(curve.values().iter().zip(&psi).all(|(v, p)| v >= p), "{name} {g}");
        }
    }
}

proptest! {
    #[test]
    fn wider_contact_band_never_shrinks_contact(
        v in prop::collection::vec(-0.2..0.2_f64, 8..64),
        d1 in 1e-4..0.1_f64,
        grow in 1.0..10.0_f64,
    ) {
        let psi = vec![0.0; v.len()];
        let narrow = classify_nodal(&v, &psi, d1);
        let wide = classify_nodal(&v, &psi, d1 * grow);
        prop_assert!(wide.fraction >= narrow.fraction);
    }
}
