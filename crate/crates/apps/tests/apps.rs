use std::path::PathBuf;

use satisfice::conic::SolveOptions;
use satisfice::engine::{solve_satisficing, Target};
use satisfice::Error;
use satisfice_apps::model_file::{load_model, read_samples_csv, write_samples_csv, ModelFile};
use satisfice_apps::portfolio::{build_model, gen_two_point_samples, two_point_outcomes, PortfolioConfig};
use satisfice_apps::teststrict::{fixture_hash, run_teststrict, FIXTURE_SHA256};
use satisfice_apps::verify::{verify, SolutionFile};

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("satisfice-apps-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

// max(z₁ + x, −z₁ − x) over a box, as two identity pieces
const MINIMAL: &str = r#"{
  "eval": {
    "B": [[1.0], [1.0]],
    "d": [1.0],
    "f0": [0.0, 0.0],
    "fX": [[1.0], [-1.0]],
    "F0": [[1.0], [-1.0]],
    "FX": [[[0.0], [0.0]]],
    "cone": [{"type": "nonneg", "dim": 2}]
  },
  "support": {"H": [[1.0], [-1.0]], "h": [1.0, 1.0]},
  "penalty": {"type": "budgeted", "gamma": 1},
  "samples": [[0.5], [-0.25]],
  "decision_set": {"A": [[1.0], [-1.0]], "b": [1.0, 1.0]},
  "target": {"lambda": 0.1}
}"#;

#[test]
fn minimal_model_file_loads_and_solves() {
    let dir = scratch_dir("minimal");
    let path = dir.join("model.json");
    std::fs::write(&path, MINIMAL).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded.model.omega(), 2);
    assert_eq!(loaded.target, Some(Target::Lambda(0.1)));
    let sol = solve_satisficing(&loaded.model, loaded.target.unwrap(), &SolveOptions::default()).unwrap();
    let report = verify(&loaded.model, &SolutionFile::from(&sol), None).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn negative_support_rhs_is_a_validation_error() {
    let text = MINIMAL.replace(r#""h": [1.0, 1.0]"#, r#""h": [1.0, -0.5]"#);
    let err = ModelFile::from_json(&text).unwrap().to_model(None).unwrap_err();
    match &err {
        Error::Validation(m) => assert!(m.starts_with("support"), "{m}"),
        other => panic!("expected a validation error, got {other:?}"),
    }
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn wrong_row_length_names_its_field() {
    let text = MINIMAL.replace(r#""F0": [[1.0], [-1.0]]"#, r#""F0": [[1.0], [-1.0, 2.0]]"#);
    match ModelFile::from_json(&text).unwrap().to_model(None) {
        Err(Error::Validation(m)) => assert!(m.contains("eval.F0"), "{m}"),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn portfolio_model_round_trips_bit_identically() {
    let cfg = PortfolioConfig {
        omega: 12,
        ..PortfolioConfig::default()
    };
    let samples = gen_two_point_samples(&cfg);
    let pm = build_model(&samples, 4.0, 3, cfg.padding).unwrap();
    let first = ModelFile::from_model(&pm.model, Some(Target::Lambda(0.01))).to_json().unwrap();
    let parsed = ModelFile::from_json(&first).unwrap().to_model(None).unwrap();
    assert_eq!(parsed.model, pm.model);
    let second = ModelFile::from_model(&parsed.model, parsed.target).to_json().unwrap();
    assert_eq!(first, second);
}

#[test]
fn samples_csv_round_trips_and_resolves_relative_paths() {
    let dir = scratch_dir("csv");
    let cfg = PortfolioConfig {
        omega: 7,
        ..PortfolioConfig::default()
    };
    let samples = gen_two_point_samples(&cfg);
    write_samples_csv(dir.join("samples.csv"), &cfg.asset_names(), &samples).unwrap();
    let (header, rows) = read_samples_csv(dir.join("samples.csv")).unwrap();
    assert_eq!(header, cfg.asset_names());
    assert_eq!(rows, samples);

    let text = MINIMAL.replace(r#""samples": [[0.5], [-0.25]]"#, r#""samples": "one.csv""#);
    write_samples_csv(dir.join("one.csv"), &["z".to_string()], &[vec![0.5], vec![-0.25]]).unwrap();
    std::fs::write(dir.join("model.json"), text).unwrap();
    assert_eq!(load_model(dir.join("model.json")).unwrap().model.omega(), 2);
}

#[test]
fn two_point_outcomes_of_the_first_asset() {
    let cfg = PortfolioConfig::default();
    let beta = 0.5 * (1.0 + 1.0 / 9.0);
    assert!((cfg.beta[0] - 5.0 / 9.0).abs() < 1e-15);
    let (up, down) = two_point_outcomes(0.12, 0.18, beta);
    // μ + σ√(β(1−β))/β and μ − σ√(β(1−β))/(1−β)
    let s = (beta * (1.0 - beta)).sqrt();
    assert!((up - (0.12 + 0.18 * s / beta)).abs() < 1e-15);
    assert!((down - (0.12 - 0.18 * s / (1.0 - beta))).abs() < 1e-15);
    assert!((up - 0.280996894379985).abs() < 1e-12 && (down + 0.081246117974981).abs() < 1e-12, "{up} {down}");
    // the mean and variance of the two-point law
    let mean = beta * up + (1.0 - beta) * down;
    let var = beta * (up - mean).powi(2) + (1.0 - beta) * (down - mean).powi(2);
    assert!((mean - 0.12).abs() < 1e-14 && (var - 0.18 * 0.18).abs() < 1e-14);
    let (u, d) = two_point_outcomes(0.1, 0.2, 0.5);
    assert!((u - 0.3).abs() < 1e-15 && (d + 0.1).abs() < 1e-15);
}

#[test]
fn sample_moments_converge() {
    let cfg = PortfolioConfig {
        omega: 100_000,
        ..PortfolioConfig::default()
    };
    let samples = gen_two_point_samples(&cfg);
    let n = samples.len() as f64;
    for i in 0..cfg.n() {
        let mean = samples.iter().map(|s| s[i]).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = cfg.sigma[i] / n.sqrt();
        assert!((mean - cfg.mu[i]).abs() <= 3.0 * se, "asset {i}: mean {mean}");
        // the variance of the sample variance of a two-point law is (m4 − σ⁴)/Ω
        let b = cfg.beta[i];
        let s2 = cfg.sigma[i].powi(2);
        let m4 = s2 * s2 * ((1.0 - b).powi(3) + b.powi(3)) / (b * (1.0 - b));
        let se_var = ((m4 - s2 * s2) / n).sqrt();
        assert!((var - s2).abs() <= 3.0 * se_var, "asset {i}: variance {var}");
    }
}

#[test]
fn sampling_is_reproducible() {
    let cfg = PortfolioConfig::default();
    assert_eq!(gen_two_point_samples(&cfg), gen_two_point_samples(&cfg));
    let other = PortfolioConfig {
        seed: cfg.seed + 1,
        ..cfg.clone()
    };
    assert_ne!(gen_two_point_samples(&cfg), gen_two_point_samples(&other));
}

#[test]
fn teststrict_fixture_matches_its_hash() {
    assert_eq!(fixture_hash(), FIXTURE_SHA256);
}

#[test]
fn teststrict_fragility_vanishes_for_large_targets() {
    let taus = [10.0, 100.0, 200.0, 300.0, 400.0, 1000.0];
    let report = run_teststrict(&taus, &SolveOptions::default()).unwrap();
    let mut last = (f64::INFINITY, f64::INFINITY);
    for row in &report.rows {
        assert!(row.k_dual <= row.k_primal + 1e-6);
        assert!(row.k_primal <= last.0 + 1e-6 && row.k_dual <= last.1 + 1e-6);
        last = (row.k_primal, row.k_dual);
    }
    assert!(last.0 < 1e-6 && last.1 < 1e-6, "{last:?}");
}

fn cli(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_satisfice"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = scratch_dir("cli");
    let good = dir.join("model.json");
    std::fs::write(&good, MINIMAL).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, MINIMAL.replace(r#""h": [1.0, 1.0]"#, r#""h": [1.0, -0.5]"#)).unwrap();
    let sol = dir.join("sol.json");

    let out = cli(&["solve", good.to_str().unwrap(), "--out", sol.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = cli(&["verify", good.to_str().unwrap(), sol.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(cli(&["empirical", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(cli(&["empirical", dir.join("missing.json").to_str().unwrap()]).status.code(), Some(2));
}
