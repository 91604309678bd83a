use colt_ot::bench::{run_experiment, ExperimentConfig, ProblemKind, SolverKind};

#[test]
fn repeated_cells_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg =
        ExperimentConfig::new(ProblemKind::Gaussian1D, vec![100], vec![SolverKind::Fs2, SolverKind::Ipot], dir.path());
    cfg.repetitions = 3;
    cfg.outer = 40;
    let s = run_experiment(&cfg).unwrap();
    assert_eq!(s.records.len(), 2);
    assert!(s.records.iter().all(|r| r.failure.is_none() && r.repetitions == 3));
    let (a, b) = (s.records[0].w1.unwrap(), s.records[1].w1.unwrap());
    assert!((a - b).abs() < 1e-10);
    let fro = s.records.iter().find_map(|r| r.plan_frobenius_vs_ipot).unwrap();
    assert!(fro < 1e-10);
}

#[test]
fn trace_rows_match_outer_steps() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ProblemKind::Random2D, vec![8], vec![SolverKind::Fs2], dir.path());
    cfg.outer = 25;
    let s = run_experiment(&cfg).unwrap();
    assert_eq!(s.trace_paths.len(), 1);
    let mut rdr = csv::Reader::from_path(&s.trace_paths[0]).unwrap();
    let elapsed: Vec<f64> = rdr.records().map(|r| r.unwrap()[5].parse().unwrap()).collect();
    assert_eq!(elapsed.len(), 25);
    assert!(elapsed.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn entropic_cells_are_split_by_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ProblemKind::Gaussian1D, vec![50], vec![SolverKind::Fs1], dir.path());
    cfg.epsilons = vec![0.1, 0.05];
    cfg.outer = 10;
    let s = run_experiment(&cfg).unwrap();
    assert_eq!(s.records.len(), 2);
    assert_eq!(s.trace_paths.len(), 2);
    assert!(s.records.iter().all(|r| r.oracle_error.is_some()));
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::new(ProblemKind::Gaussian1D, vec![100], vec![], dir.path());
    assert!(run_experiment(&cfg).is_err());
    let cfg = ExperimentConfig::new(ProblemKind::Gaussian1D, vec![], vec![SolverKind::Fs2], dir.path());
    assert!(run_experiment(&cfg).is_err());
}
