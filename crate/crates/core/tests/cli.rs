use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_muckenhoupt"));
    c.env_remove("MUCKENHOUPT_OUT_DIR");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report on stdout")
}

fn strip_timings(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("wall_time_s");
            m.values_mut().for_each(strip_timings);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

fn close(a: &Value, b: &Value, path: &str, tol: f64) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() <= tol * x.abs().max(y.abs()).max(1e-12) {
                Ok(())
            } else {
                Err(format!("{path}: {x} vs {y}"))
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            if x.len() != y.len() {
                return Err(format!("{path}: keys differ"));
            }
            for (k, v) in x {
                close(v, y.get(k).ok_or(format!("{path}.{k} missing"))?, &format!("{path}.{k}"), tol)?;
            }
            Ok(())
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                return Err(format!("{path}: lengths differ"));
            }
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                close(u, v, &format!("{path}[{i}]"), tol)?;
            }
            Ok(())
        }
        _ if a == b => Ok(()),
        _ => Err(format!("{path}: {a} vs {b}")),
    }
}

#[test]
fn reproduce_example_matches_golden() {
    let out = run(bin().arg("reproduce-example"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut report = stdout_json(&out);
    strip_timings(&mut report);
    assert_eq!(report["blocks"][0]["result"]["pass"], Value::Bool(true));
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/reproduce_example.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden_path, serde_json::to_string_pretty(&report).unwrap() + "\n").unwrap();
    }
    let mut golden: Value = serde_json::from_str(&std::fs::read_to_string(&golden_path).unwrap()).unwrap();
    golden["version"] = report["version"].clone();
    close(&report, &golden, "$", 1e-8).unwrap();
}

#[test]
fn runs_are_deterministic() {
    let go = || {
        let out = run(bin().args(["analyze", "--config"]).arg(config("hilbert_probe.json")));
        assert_eq!(out.status.code(), Some(0));
        let mut v = stdout_json(&out);
        strip_timings(&mut v);
        v
    };
    assert_eq!(go(), go());
}

#[test]
fn seed_override_reaches_the_report() {
    let out = run(bin().args(["probe", "--seed", "11", "--config"]).arg(config("hilbert_probe.json")));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["config"]["seed"], 11);
}

#[test]
fn unknown_weight_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"weight": {"source": "catalog", "name": "nope"}, "domain": {"kind": {"kind": "euclidean", "d": 1}, "window": [{"lo": 0, "hi": 1}]}, "p": 2, "analyses": ["ap"]}"#,
    )
    .unwrap();
    let out = run(bin().args(["analyze", "--config"]).arg(&path));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weight.name"));
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = run(bin().args(["analyze", "--config", "/nonexistent/config.json"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergence_under_expect_bounded_exits_one() {
    let out = run(bin().args(["analyze", "--config"]).arg(config("scalar_divergent.json")));
    assert_eq!(out.status.code(), Some(1));
    let report = stdout_json(&out);
    assert_eq!(report["blocks"][0]["result"]["trace"]["verdict"]["class"], "divergence_suspected");
}

#[test]
fn numeric_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("degenerate.json");
    std::fs::write(
        &path,
        r#"{"weight": {"source": "catalog", "name": "diag_power", "params": {"alpha": [1.5, 0]}}, "domain": {"kind": {"kind": "euclidean", "d": 1}, "window": [{"lo": -1, "hi": 1}]}, "p": 2, "analyses": ["ap"], "expect_bounded": true}"#,
    )
    .unwrap();
    let out = run(bin().args(["analyze", "--config"]).arg(&path));
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["blocks"][0]["status"], "error");
}

#[test]
fn list_catalog_names_every_weight() {
    let out = run(bin().arg("list-catalog"));
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    let names: Vec<_> = doc["weights"].as_array().unwrap().iter().map(|w| w["name"].as_str().unwrap().to_string()).collect();
    for n in ["identity", "diag_power", "paper_example", "rotated_power", "product_diag_power", "scalar_power"] {
        assert!(names.contains(&n.to_string()), "{n}");
    }
    assert!(!doc["kernels"].as_array().unwrap().is_empty());
}

#[test]
fn plot_data_is_written_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("div.csv");
    let report = dir.path().join("out/report.json");
    let out = run(bin()
        .args(["reproduce-example", "--out"])
        .arg(&report)
        .arg("--plot")
        .arg(format!("example/divergence:{}", csv.display())));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert!(report.exists());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,value,resolution"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 13);
    for r in rows {
        assert!((r[1] - (1.0 + 1.0 / r[0])).abs() <= 1e-9 * r[1]);
    }
}

#[test]
fn unknown_plot_block_fails_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .args(["reproduce-example", "--out"])
        .arg(dir.path().join("r.json"))
        .args(["--plot", "nowhere:x.csv"]));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin().env("MUCKENHOUPT_OUT_DIR", dir.path()).args(["roudenko", "--config"]).arg(config("diag_power.json")));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("roudenko.json")).unwrap()).unwrap();
    let ids: Vec<_> = report["blocks"].as_array().unwrap().iter().map(|b| b["id"].clone()).collect();
    assert_eq!(ids, vec![Value::from("roudenko")]);
}

#[test]
fn resolution_ladder_override() {
    let out = run(bin()
        .args(["roudenko", "--resolution-ladder", "1e-2,1e-3,1e-4", "--config"])
        .arg(config("diag_power.json")));
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["config"]["ladder"]["floors"], serde_json::json!([1e-2, 1e-3, 1e-4]));
    assert_eq!(report["blocks"][0]["result"]["trace"]["values"].as_array().unwrap().len(), 3);
}
