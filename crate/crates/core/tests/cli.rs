use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levy-spread"))
        .args(args)
        .env("PRICER_LOG", "error")
        .output()
        .expect("binary runs")
}

fn run_config(cmd: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn write_config(dir: &TempDir, name: &str, value: &Value) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o)
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn gaussian_call() -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture("gaussian_call.json")).unwrap()).unwrap()
}

#[test]
fn price_writes_csv_row() {
    let out = run_config("price", &fixture("gaussian_call.json"), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = rows(&out);
    assert_eq!(
        rows[0].join(","),
        "value,imag_residue,lattice_size,tail_bound,trunc_bound"
    );
    assert_eq!(rows.len(), 2);
    let value: f64 = rows[1][0].parse().unwrap();
    assert!((value / 10.450583572185565 - 1.0).abs() < 1e-3);
    let size: usize = rows[1][2].parse().unwrap();
    assert!(size > 0);
}

#[test]
fn price_to_file_and_serial_are_identical() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("price.csv");
    let out = run_config(
        "price",
        &fixture("kobol_spread.json"),
        &["--out", target.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let parallel = std::fs::read_to_string(&target).unwrap();
    let serial = run_config("price", &fixture("kobol_spread.json"), &["--serial"]);
    assert_eq!(parallel, stdout(&serial));
    let two = run_config("price", &fixture("kobol_spread.json"), &["--threads", "2"]);
    assert_eq!(parallel, stdout(&two));
}

#[test]
fn missing_field_is_a_config_error_with_path() {
    let dir = TempDir::new().unwrap();
    let mut cfg = gaussian_call();
    cfg["contract"].as_object_mut().unwrap().remove("strike");
    let out = run_config("price", &write_config(&dir, "c.json", &cfg), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("error_code=2") && err.contains("contract") && err.contains("strike"),
        "{err}"
    );

    let mut cfg = gaussian_call();
    cfg["contract"]["strik"] = json!(1.0);
    let out = run_config("price", &write_config(&dir, "d.json", &cfg), &[]);
    assert_eq!(out.status.code(), Some(2));

    let mut cfg = gaussian_call();
    cfg["model"]["diag"][0]["sigma"] = json!(-0.2);
    let out = run_config("price", &write_config(&dir, "e.json", &cfg), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("model.diag[0]"), "{}", stderr(&out));

    let out = run(&["price", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn adaptedness_violation_is_numeric_error() {
    let out = run_config("price", &fixture("adaptedness.json"), &[]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(
        err.contains("adaptedness") && err.contains("lambda_+ > 1"),
        "{err}"
    );
}

#[test]
fn lattice_cap_is_a_budget_error() {
    let dir = TempDir::new().unwrap();
    let mut cfg = gaussian_call();
    cfg["grid"] = json!({"mode": "auto", "lattice_cap": 10});
    let out = run_config("price", &write_config(&dir, "c.json", &cfg), &[]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn density_reproduces_standard_gaussian_error() {
    let out = run_config("density", &fixture("gaussian_density.json"), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = rows(&out);
    assert_eq!(
        rows[0].join(","),
        "x1,x2,density,residue,outside_box,closed_form"
    );
    assert_eq!(rows.len(), 1 + 121 * 121);
    let worst = rows[1..]
        .iter()
        .map(|r| (r[2].parse::<f64>().unwrap() - r[5].parse::<f64>().unwrap()).abs())
        .fold(0.0f64, f64::max);
    assert!((worst / 1.747e-3 - 1.0).abs() <= 0.05, "{worst}");
}

#[test]
fn density_single_row_and_outside_flag() {
    let dir = TempDir::new().unwrap();
    let mut cfg: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("gaussian_density.json")).unwrap())
            .unwrap();
    cfg["density"]["axes"] =
        json!([{"start": 0.5, "stop": 0.5, "points": 1}, {"start": 4.0, "stop": 4.0, "points": 1}]);
    let dump = dir.path().join("lattice.txt");
    let out = run_config(
        "density",
        &write_config(&dir, "d.json", &cfg),
        &["--lattice-dump", dump.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = rows(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][4], "1");
    assert_eq!(std::fs::read_to_string(dump).unwrap().lines().count(), 49);
}

#[test]
fn lattice_dump_is_one_vector_per_line() {
    let out = run_config("lattice", &fixture("gaussian_density.json"), &[]);
    assert!(out.status.success());
    let text = stdout(&out);
    let points: Vec<Vec<i64>> = text
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(points.len(), 49);
    assert!(points
        .iter()
        .all(|p| p.len() == 2 && p.iter().all(|v| v.abs() <= 3)));
}

#[test]
fn calibrate_emm_sets_gaussian_drift_and_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first.json");
    let out = run_config(
        "calibrate-emm",
        &fixture("gaussian_call.json"),
        &["--out", first.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let table = rows(&out);
    assert_eq!(
        table[0][..4].join(","),
        "component,kind,drift_before,drift_after"
    );
    let after: f64 = table[1][3].parse().unwrap();
    assert!((after - (0.05 - 0.5 * 0.2 * 0.2)).abs() < 1e-14);

    let adjusted: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    assert!((adjusted["model"]["diag"][0]["mu"].as_f64().unwrap() - 0.03).abs() < 1e-14);

    let second = dir.path().join("second.json");
    let again = run_config(
        "calibrate-emm",
        &first,
        &["--out", second.to_str().unwrap()],
    );
    assert!(again.status.success());
    let table = rows(&again);
    assert_eq!(table[1][2], table[1][3]);
    assert_eq!(
        std::fs::read_to_string(&first).unwrap(),
        std::fs::read_to_string(&second).unwrap()
    );
}

#[test]
fn validate_gbm_rows_pass_and_repeat_exactly() {
    let out = run_config("validate", &fixture("gbm_spread.json"), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = rows(&out);
    let checks: Vec<&str> = table[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(checks, ["bs", "margrabe", "monte_carlo", "quadrature"]);
    assert!(table[1..].iter().all(|r| r.last().unwrap() == "pass"));
    let again = run_config("validate", &fixture("gbm_spread.json"), &[]);
    assert_eq!(stdout(&out), stdout(&again));
    let reseeded = run_config("validate", &fixture("gbm_spread.json"), &["--seed", "9"]);
    assert_ne!(stdout(&out), stdout(&reseeded));
}

#[test]
fn validate_kobol_uses_quadrature_only() {
    let out = run_config("validate", &fixture("kobol_spread.json"), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = rows(&out);
    assert_eq!(table.len(), 2);
    assert_eq!(table[1][0], "quadrature");
    assert_eq!(table[1].last().unwrap(), "pass");
}
