use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn prmrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prmrl")).args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn office_config(dir: &Path) -> PathBuf {
    let machine = fixture("a_r2.prm");
    write_config(
        dir,
        &format!(
            r#"{{
                "env": {{ "name": "office" }},
                "machines": [ {{ "path": "{}" }} ],
                "algorithm": "prme_rs",
                "trials": 2,
                "max_training_steps": 300,
                "output_dir": "run"
            }}"#,
            machine.display()
        ),
    )
}

#[test]
fn validate_fixtures() {
    for name in ["a_r1.prm", "a_r2.prm", "a_r3.prm"] {
        let out = prmrl(&["validate", fixture(name).to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn validate_rejects_broken_machine() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.prm");
    fs::write(&bad, "machine m\nalphabet { a }\nmode q init {\n  on a -> nowhere reward 1\n}\n").unwrap();
    let out = prmrl(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn train_plot_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = office_config(dir.path());
    let out = prmrl(&["train", "--config", cfg.to_str().unwrap(), "--jobs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run");
    for f in ["metrics.csv", "aggregate.csv", "curve.svg", "run.json", "qtable.csv"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }

    let svg = dir.path().join("plot.svg");
    let out = prmrl(&["plot", run.join("metrics.csv").to_str().unwrap(), "-o", svg.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let mode = prmrl::fixtures::a_r2().modes[0].name.clone();
    let out = prmrl(&["heatmap", "--run", run.to_str().unwrap(), "--mode", &mode]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(run.join(format!("heatmap_{mode}.csv"))).unwrap();
    assert!(csv.starts_with("row,col,value"));

    let out = prmrl(&["heatmap", "--run", run.to_str().unwrap(), "--mode", "no_such_mode"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_writes_policy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = office_config(dir.path());
    let out = prmrl(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["value"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("run/oracle.csv").is_file());
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write_config(
        dir.path(),
        r#"{"env":{"name":"office"},"machines":[{"path":"nope.prm"}],"algorithm":"ql"}"#,
    );
    assert_eq!(prmrl(&["train", "--config", missing.to_str().unwrap()]).status.code(), Some(1));
    let mismatch = write_config(
        dir.path(),
        r#"{"env":{"name":"five_room"},"machines":[{"fixture":"a_r3"}],"algorithm":"ql"}"#,
    );
    assert_eq!(prmrl(&["train", "--config", mismatch.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(prmrl(&["oracle", "--config", "/nonexistent/config.json"]).status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"env":{"name":"office"},"machines":[{"fixture":"a_r2"}],"algorithm":"ql","trials":1,"max_training_steps":100,"output_dir":"out"}"#,
    );
    fs::write(dir.path().join("out"), "a file where the run directory should go").unwrap();
    assert_eq!(prmrl(&["train", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}
