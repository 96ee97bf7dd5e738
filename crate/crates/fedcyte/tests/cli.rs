//! End-to-end CLI tests: generate/run/report flows, exit codes, and the
//! promise that input dataset files are never touched.

use std::path::Path;
use std::process::Command;

fn fedcyte() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedcyte"))
}

fn data_rows(path: &Path) -> usize {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().filter(|l| !l.is_empty()).count() - 2 // metadata + header
}

#[test]
fn generate_full_preset_matches_institution_totals() {
    let out = tempfile::tempdir().unwrap();
    let status = fedcyte()
        .args(["generate", "--preset", "paper-table1", "--out"])
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["client1.csv", "client2.csv", "client3-holdout.csv", "manifest.json"] {
        assert!(out.path().join(f).exists(), "{f} missing");
    }
    assert_eq!(data_rows(&out.path().join("client1.csv")), 9283);
    assert_eq!(data_rows(&out.path().join("client2.csv")), 8985);
    assert_eq!(data_rows(&out.path().join("client3-holdout.csv")), 8969);
}

#[test]
fn generate_is_deterministic_for_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let status = fedcyte()
            .args(["generate", "--preset", "paper-table1-tenth", "--seed", "9", "--out"])
            .arg(dir.path())
            .status()
            .unwrap();
        assert!(status.success());
    }
    let left = std::fs::read(a.path().join("client1.csv")).unwrap();
    let right = std::fs::read(b.path().join("client1.csv")).unwrap();
    assert_eq!(left, right);
}

#[test]
fn run_from_csv_files_leaves_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let status = fedcyte()
        .args(["generate", "--preset", "paper-table1-tenth", "--out"])
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());
    let before = std::fs::read(data.join("client1.csv")).unwrap();

    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            r#"
master_seed = 5

[[experiment]]
id = "csv-fedavg"
paradigm = "federated"
rounds = 1
model = {{ kind = "softmax_regression" }}
strategy = {{ kind = "fedavg" }}
data = {{ clients = ["{c1}", "{c2}"], holdout = "{h}" }}
"#,
            c1 = data.join("client1.csv").display(),
            c2 = data.join("client2.csv").display(),
            h = data.join("client3-holdout.csv").display(),
        ),
    )
    .unwrap();

    let out = dir.path().join("out");
    let status = fedcyte()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("results.jsonl").exists());
    assert!(out.join("report.txt").exists());
    assert_eq!(before, std::fs::read(data.join("client1.csv")).unwrap());

    // results round-trip through the report command
    let printed = fedcyte()
        .arg("report")
        .arg(out.join("results.jsonl"))
        .output()
        .unwrap();
    assert!(printed.status.success());
    let report_file = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert_eq!(String::from_utf8(printed.stdout).unwrap(), report_file);

    // the results document embeds the fully resolved config
    let results = std::fs::read_to_string(out.join("results.jsonl")).unwrap();
    let record: serde_json::Value = serde_json::from_str(results.lines().next().unwrap()).unwrap();
    assert_eq!(record["config"]["trainer"]["local_epochs"], 5);
    assert_eq!(record["config"]["master_seed"], 5);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(
        &config,
        "master_seed = 1\n[[experiment]]\nid = \"x\"\nparadigm = \"federated\"\nturbo = true\nmodel = { kind = \"softmax_regression\" }\ndata = { synthetic = { preset = \"paper-table1\", scale = 0.1 } }\n",
    )
    .unwrap();
    let output = fedcyte()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());

    // mutually exclusive flags are a config error too
    let output = fedcyte().arg("run").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "[[experiment]]\nid = \"x\"\nparadigm = \"federated\"\nmodel = { kind = \"softmax_regression\" }\nstrategy = { kind = \"fedavg\" }\ndata = { clients = [\"/nonexistent/a.csv\"] }\n",
    )
    .unwrap();
    let output = fedcyte()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));

    let output = fedcyte().args(["report", "/nonexistent/results.jsonl"]).output().unwrap();
    assert_eq!(output.status.code(), Some(3));
}
