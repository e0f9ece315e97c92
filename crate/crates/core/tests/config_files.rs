use std::fs;

use sgmlab::config::{load_config, templates, ConfigError};
use sgmlab::harness::{geometric_checkpoints, run_replicates};

const LEAST_SQUARES: &str = r#"{
  "problem": {"least_squares": {"csv": "data/points.csv"}},
  "domain": {"ball": {"center": [0.0, 0.0], "radius": 3.0}},
  "noise": {"minibatch": {"batch_size": 2}},
  "variant": "sg",
  "step": {"polynomial": {"gamma": 1.0, "alpha": 1.0}},
  "theta0": [0.0, 0.0],
  "horizon": 200,
  "replicates": 8,
  "master_seed": 1
}"#;

fn points_csv() -> String {
    let mut s = String::new();
    for i in 0..12 {
        let x1 = (i as f64 * 0.37).sin();
        let x2 = (i as f64 * 0.91).cos();
        s.push_str(&format!("{x1}, {x2}, {}\n", 0.8 * x1 - 0.5 * x2));
    }
    s
}

#[test]
fn least_squares_csv_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("data")).unwrap();
    fs::write(dir.path().join("data/points.csv"), points_csv()).unwrap();
    let path = dir.path().join("ls.json");
    fs::write(&path, LEAST_SQUARES).unwrap();

    let config = load_config(&path, &[]).unwrap();
    let resolved = config.resolve(dir.path(), 2).unwrap();
    let star = resolved.experiment.problem.theta_star().to_vec();
    assert!((star[0] - 0.8).abs() < 1e-9 && (star[1] + 0.5).abs() < 1e-9, "{star:?}");
    let summary = run_replicates(&resolved.experiment).unwrap();
    assert_eq!(summary.checkpoints(), geometric_checkpoints(200));
}

#[test]
fn missing_csv_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ls.json");
    fs::write(&path, LEAST_SQUARES).unwrap();
    let config = load_config(&path, &[]).unwrap();
    let err = config.resolve(dir.path(), 1).unwrap_err();
    assert!(err.to_string().contains("points.csv"), "{err}");
}

#[test]
fn overrides_apply_before_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    fs::write(&path, templates::template("plateau").unwrap().to_pretty_json()).unwrap();
    let c = load_config(&path, &["step.constant.a=0.05".into(), "replicates=4".into()]).unwrap();
    assert_eq!(c.replicates, 4);
    let err = load_config(&path, &["noise.gaussian.sigma3=1".into()]).unwrap_err();
    assert!(matches!(err, ConfigError::Parse { .. }), "{err:?}");
    assert!(err.to_string().contains("noise.gaussian"), "{err}");
}

#[test]
fn hash_ignores_worker_count() {
    let mut a = templates::template("sg-harmonic").unwrap();
    let mut b = a.clone();
    a.workers = Some(1);
    b.workers = Some(8);
    assert_eq!(a.hash(), b.hash());
    b.master_seed += 1;
    assert_ne!(a.hash(), b.hash());
}
