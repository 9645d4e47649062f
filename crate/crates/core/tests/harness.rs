use sparselow::harness::{
    cells_csv, results_csv, run_phase_transition, ExperimentSpec, PhaseResults, SolverSpec, StepKind, PRESET_NAMES,
    RESULTS_HEADER,
};
use sparselow::par::Parallelism;
use sparselow::solvers::Algorithm;

fn tiny() -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset("fig1-desk").unwrap();
    spec.name = "tiny".into();
    spec.rows = 20;
    spec.s_values = vec![3];
    spec.trials = 3;
    spec.solvers = vec![
        SolverSpec::new(Algorithm::Iht, StepKind::Armijo),
        SolverSpec::new(Algorithm::Riht, StepKind::Armijo),
    ];
    spec
}

#[test]
fn fully_determined_cell_always_succeeds() {
    let mut spec = tiny();
    // m = M·N: the measurements determine X outright
    spec.m_values = vec![60];
    let r = run_phase_transition(&spec, Parallelism::Sequential).unwrap();
    assert_eq!(r.cells.len(), 2);
    for c in &r.cells {
        assert_eq!(c.rate(), 1.0, "{c:?}");
    }
}

#[test]
fn parallel_and_sequential_runs_agree() {
    let mut spec = tiny();
    spec.m_values = vec![12, 30];
    let a = run_phase_transition(&spec, Parallelism::Sequential).unwrap();
    let b = run_phase_transition(&spec, Parallelism::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(results_csv(&a), results_csv(&b));
}

#[test]
fn one_csv_row_per_trial_and_cell() {
    let mut spec = tiny();
    spec.m_values = vec![12, 30];
    let r = run_phase_transition(&spec, Parallelism::Parallel).unwrap();
    let trials = 2 * 2 * 3;
    assert_eq!(results_csv(&r).lines().count(), trials + 1);
    assert_eq!(cells_csv(&r).lines().count(), 4 + 1);
    assert_eq!(results_csv(&r).lines().next().unwrap(), RESULTS_HEADER.join(","));
}

#[test]
fn empty_results_give_header_only() {
    let r = PhaseResults {
        spec: tiny(),
        trials: Vec::new(),
        cells: Vec::new(),
    };
    assert_eq!(results_csv(&r), format!("{}\n", RESULTS_HEADER.join(",")));
    assert_eq!(cells_csv(&r).lines().count(), 1);
}

#[test]
fn presets_round_trip_through_toml() {
    for name in PRESET_NAMES {
        let spec = ExperimentSpec::preset(name).unwrap();
        spec.validate().unwrap();
        let back = ExperimentSpec::from_toml_str(&spec.to_toml_string()).unwrap();
        assert_eq!(spec, back, "{name}");
    }
}

#[test]
fn unknown_keys_are_rejected_with_a_line_number() {
    let err = ExperimentSpec::from_toml_str("name = \"x\"\nrows = 10\nbogus = 1\n").unwrap_err();
    let msg = err.to_string();
    assert_eq!(err.kind(), "spec");
    assert!(msg.contains("line"), "{msg}");
}
