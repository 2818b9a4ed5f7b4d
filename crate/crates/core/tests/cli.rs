use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn pnl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnl-attrib"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run(command: &str, config: &Path, out: &Path) -> Output {
    pnl(&[command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "1"])
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn first_order_decompose_writes_one_row_per_time() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("decompose", &scenario("first_order.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let mut reader = csv::Reader::from_path(dir.path().join("decomposition.csv")).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["seed", "t", "component_label", "D_value", "R_value", "partition_level", "order"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    // Times 0, 0.25, 0.5, 0.75, 1 with two components each.
    assert_eq!(rows.len(), 10);
    let d2: f64 = rows
        .iter()
        .find(|r| &r[1] == "1" && &r[2] == "mortality")
        .map(|r| r[3].parse().unwrap())
        .unwrap();
    assert!((d2 - ((-0.1f64).exp() - 1.0)).abs() < 1e-5, "{d2}");
    for name in ["decomposition_summary.csv", "decompose_summary.json", "decompose_manifest.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("decompose_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], true);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = run("decompose", &scenario("risk_neutral.toml"), dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for name in ["decomposition.csv", "decomposition_summary.csv", "decompose_summary.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = scenario("risk_neutral.toml");
    let cfg = config.to_str().unwrap();
    pnl(&["decompose", "--config", cfg, "--out", a.path().to_str().unwrap(), "--jobs", "1"]);
    pnl(&["decompose", "--config", cfg, "--out", b.path().to_str().unwrap(), "--jobs", "3"]);
    assert_eq!(
        fs::read(a.path().join("decomposition.csv")).unwrap(),
        fs::read(b.path().join("decomposition.csv")).unwrap()
    );
}

#[test]
fn invalid_configs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("additive.toml")).unwrap();

    let zero = dir.path().join("zero.toml");
    fs::write(&zero, text.replace("n_paths = 1", "n_paths = 0")).unwrap();
    let o = run("decompose", &zero, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_paths"), "{}", stderr(&o));

    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, text.replace("[mc]", "[mc]\nwarmup = 3")).unwrap();
    let o = run("decompose", &unknown, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("warmup"), "{}", stderr(&o));

    let o = run("decompose", &dir.path().join("missing.toml"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn converge_passes_on_additive_and_risk_neutral() {
    for name in ["additive.toml", "risk_neutral.toml", "first_order.toml"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run("converge", &scenario(name), dir.path());
        assert_eq!(o.status.code(), Some(0), "{name}: {}{}", stdout(&o), stderr(&o));
        assert!(dir.path().join("convergence.csv").exists());
    }
}

#[test]
fn same_time_product_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("converge", &scenario("product_same_time.toml"), dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL order-invariance"), "{}", stdout(&o));
    let summary = fs::read_to_string(dir.path().join("converge_summary.json")).unwrap();
    assert!(summary.contains("persistent"), "{summary}");
}

#[test]
fn axioms_and_stability_pass() {
    for command in ["axioms", "stability"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(command, &scenario("risk_neutral.toml"), dir.path());
        assert_eq!(o.status.code(), Some(0), "{command}: {}{}", stdout(&o), stderr(&o));
    }
}

#[test]
fn waterfall_from_decomposition_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("decompose", &scenario("additive.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let table = dir.path().join("decomposition.csv");
    let table = table.to_str().unwrap();

    let o = pnl(&["waterfall", "--input", table, "--from", "0", "--to", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let wf: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let bars = wf["bars"].as_array().unwrap();
    let values: Vec<f64> = bars.iter().map(|b| b["value"].as_f64().unwrap()).collect();
    assert_eq!(values, vec![3.0, 2.0, -1.0, 4.0]);
    assert_eq!(wf["reconciliation_residual"].as_f64().unwrap(), 0.0);

    let o = pnl(&["waterfall", "--input", table, "--from", "0.5", "--to", "0.5"]);
    let wf: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let deltas: Vec<f64> = wf["bars"].as_array().unwrap()[1..3].iter().map(|b| b["value"].as_f64().unwrap()).collect();
    assert_eq!(deltas, vec![0.0, 0.0]);

    let o = pnl(&["waterfall", "--input", table, "--from", "0", "--to", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("available times: 0, 0.5, 1"), "{}", stderr(&o));

    let out = dir.path().join("wf");
    let o = pnl(&["waterfall", "--input", table, "--from", "0", "--to", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("waterfall.json").exists());
}

#[test]
fn risk_neutral_waterfall_reconciles() {
    let dir = tempfile::tempdir().unwrap();
    run("decompose", &scenario("risk_neutral.toml"), dir.path());
    let table = dir.path().join("decomposition.csv");
    let o = pnl(&["waterfall", "--input", table.to_str().unwrap(), "--from", "0.5", "--to", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let wf: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let bars: Vec<f64> = wf["bars"].as_array().unwrap().iter().map(|b| b["value"].as_f64().unwrap()).collect();
    let (start, end) = (bars[0], bars[bars.len() - 1]);
    let sum: f64 = bars[1..bars.len() - 1].iter().sum();
    assert!((start + sum - end).abs() <= 1e-10 * start.abs().max(end.abs()));
}

#[test]
fn seed_override_changes_the_realisation() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = scenario("risk_neutral.toml");
    let cfg = cfg.to_str().unwrap();
    pnl(&["decompose", "--config", cfg, "--out", a.path().to_str().unwrap()]);
    pnl(&["decompose", "--config", cfg, "--out", b.path().to_str().unwrap(), "--seed-override", "99"]);
    assert_ne!(
        fs::read(a.path().join("decomposition.csv")).unwrap(),
        fs::read(b.path().join("decomposition.csv")).unwrap()
    );
}
