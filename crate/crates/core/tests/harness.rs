use std::fs;
use std::path::Path;

use proptest::prelude::*;

use prmrl::harness::{aggregate, median, percentile, run_experiment, ExperimentConfig, PERCENTILE_METHOD};
use prmrl::tabular::MetricPoint;

/// Quantile by the `(n − 1)p` rank rule, written from scratch over a
/// bubble-sorted copy.
fn reference_percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
            }
        }
    }
    let rank = (v.len() - 1) as f64 * p;
    let below = rank.floor();
    let frac = rank - below;
    let i = below as usize;
    if frac == 0.0 {
        v[i]
    } else {
        v[i] * (1.0 - frac) + v[i + 1] * frac
    }
}

proptest! {
    #[test]
    fn percentile_matches_reference(
        values in prop::collection::vec(-1e6f64..1e6, 1..40),
        p in 0.0f64..=1.0,
    ) {
        let got = percentile(&values, p).unwrap();
        let want = reference_percentile(&values, p);
        prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
    }

    #[test]
    fn aggregate_rows_are_quartiles(series in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 1..8)) {
        let trials: Vec<Vec<MetricPoint>> = series
            .iter()
            .map(|s| s.iter().enumerate().map(|(i, &v)| MetricPoint { step: 10 * (i as u64 + 1), avg_reward: v }).collect())
            .collect();
        let rows = aggregate(&trials);
        prop_assert_eq!(rows.len(), 6);
        for (i, r) in rows.iter().enumerate() {
            let column: Vec<f64> = series.iter().map(|s| s[i]).collect();
            prop_assert_eq!(r.step, 10 * (i as u64 + 1));
            prop_assert!((r.p25 - reference_percentile(&column, 0.25)).abs() < 1e-9);
            prop_assert!((r.median - reference_percentile(&column, 0.5)).abs() < 1e-9);
            prop_assert!((r.p75 - reference_percentile(&column, 0.75)).abs() < 1e-9);
            prop_assert!(r.p25 <= r.median && r.median <= r.p75);
        }
    }
}

#[test]
fn small_percentile_cases() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    assert_eq!(median(&[4.0, 1.0]), Some(2.5));
    assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), Some(2.0));
    assert_eq!(percentile(&[], 0.5), None);
}

fn config(dir: &Path, algorithm: &str) -> ExperimentConfig {
    let text = format!(
        r#"{{
            "env": {{"name": "office"}},
            "machines": [{{"fixture": "a_r2"}}],
            "algorithm": "{algorithm}",
            "trials": 3,
            "base_seed": 11,
            "max_training_steps": 1000,
            "output_dir": "out"
        }}"#
    );
    let path = dir.join("experiment.json");
    fs::write(&path, text).unwrap();
    ExperimentConfig::load(&path).unwrap()
}

#[test]
fn metrics_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for algorithm in ["ql", "prme_rs"] {
        let mut cfg = config(dir.path(), algorithm);
        cfg.output_dir = dir.path().join(format!("{algorithm}_a"));
        run_experiment(&cfg, 1).unwrap();
        cfg.output_dir = dir.path().join(format!("{algorithm}_b"));
        run_experiment(&cfg, 2).unwrap();
        for file in ["metrics.csv", "aggregate.csv", "qtable.csv"] {
            let a = fs::read(dir.path().join(format!("{algorithm}_a")).join(file)).unwrap();
            let b = fs::read(dir.path().join(format!("{algorithm}_b")).join(file)).unwrap();
            assert!(!a.is_empty());
            assert_eq!(a, b, "{algorithm}: {file} differs");
        }
    }
}

#[test]
fn metadata_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "prme");
    assert_eq!(cfg.output_dir, dir.path().join("out"));
    let run = run_experiment(&cfg, 1).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(cfg.output_dir.join("run.json")).unwrap()).unwrap();
    for key in [
        "config",
        "percentile_method",
        "metric",
        "metric_window",
        "metric_every",
        "completed_trials",
        "trials",
        "warnings",
        "oracle",
        "version",
    ] {
        assert!(meta.get(key).is_some(), "missing {key}");
    }
    assert_eq!(meta["percentile_method"], PERCENTILE_METHOD);
    assert_eq!(meta["completed_trials"], 3);
    assert_eq!(meta["config"]["algorithm"], "prme");
    assert_eq!(meta["config"]["base_seed"], 11);
    assert_eq!(meta["config"]["tabular"]["use_prme"], true);
    assert_eq!(meta["config"]["tabular"]["use_shaping"], false);
    assert_eq!(meta["config"]["tabular"]["max_training_steps"], 1000);
    let trials = meta["trials"].as_array().unwrap();
    let seeds: Vec<u64> = trials.iter().map(|t| t["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, vec![11, 12, 13]);
    assert!(trials.iter().all(|t| t["error"].is_null() && t["runtime_secs"].as_f64().unwrap() >= 0.0));
    let oracle = run.oracle.unwrap();
    assert_eq!(meta["oracle"]["states"], oracle.states);
    let curve = fs::read_to_string(cfg.output_dir.join("curve.svg")).unwrap();
    assert!(curve.starts_with("<svg") && curve.contains("<polyline"));
}
