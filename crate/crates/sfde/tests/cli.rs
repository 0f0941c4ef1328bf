use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sfde_core::pricing::black_scholes;

const BASE: &str = r#"
[market]
rate = 0.05
strike = 100
maturity = 1.0

[simulation]
gap = 0.25
window = 0.5
seed = 3
replicates = 500

[initial_path]
level = 100
"#;

const CONSTANT_SPECS: &str = r#"
[drift]
kind = "constant"
value = 0.1

[vol]
kind = "constant"
value = 0.2
"#;

const PATH_SPECS: &str = r#"
[drift]
kind = "constant"
value = 0.1

[vol]
kind = "affine"
scale = 0.02
shift = 0.1

[vol.inner]
kind = "realized_vol"
floor = 0.5
cap = 50.0
"#;

fn sfde(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfde"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn field(csv: &str, row: usize, col: usize) -> String {
    csv.lines().nth(row).unwrap().split(',').nth(col).unwrap().to_owned()
}

fn manifest_value(manifest: &str, key: &str) -> String {
    let doc: toml::Table = manifest.parse().unwrap();
    doc["manifest"][key].to_string()
}

#[test]
fn closed_form_route_matches_black_scholes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{BASE}{CONSTANT_SPECS}"));
    let out = sfde(&["price"], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(field(&csv, 1, 0), "closed_form");
    let price: f64 = field(&csv, 1, 1).parse().unwrap();
    let bs = black_scholes(100.0, 100.0, 0.05, 0.2, 1.0).unwrap();
    assert!((price - bs).abs() <= 1e-12, "{price} vs {bs}");
    assert_eq!(field(&csv, 1, 6), "3");
}

#[test]
fn check_with_drift_equal_to_rate() {
    let dir = tempfile::tempdir().unwrap();
    let specs = CONSTANT_SPECS.replace("value = 0.1", "value = 0.05");
    let cfg = write(dir.path(), "c.toml", &format!("{BASE}{specs}"));
    let out_path = dir.path().join("check.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_sfde"))
        .args(["check", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(dir.path().join("check.csv.manifest")).unwrap();
    assert_eq!(manifest_value(&manifest, "normalization_pass"), "true");
    assert_eq!(manifest_value(&manifest, "normalization_estimate"), "1.0");
    assert_eq!(manifest_value(&manifest, "normalization_std_error"), "0.0");
    assert_eq!(manifest.lines().filter(|l| l.starts_with("timestamp")).count(), 1);
}

#[test]
fn invalid_configuration_exits_one_and_lists_everything() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}{CONSTANT_SPECS}")
        .replace("strike = 100", "strike = -1\ntypo = 2")
        .replace("gap = 0.25", "gap = 0.5\ndt = 0.3");
    let cfg = write(dir.path(), "bad.toml", &text);
    let out = sfde(&["price"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("market.strike must be positive"), "{err}");
    assert!(err.contains("unknown key `market.typo`"), "{err}");
    assert!(err.contains("does not divide simulation.gap"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn volatility_breach_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // declared bounds claim positivity; a falling average breaks them
    let specs = r#"
[drift]
kind = "constant"
value = -0.5

[vol]
kind = "affine"
scale = 0.01
shift = -0.9
bounds = [0.05, 1.0]

[vol.inner]
kind = "moving_average"
"#;
    let text = format!("{BASE}{specs}").replace("replicates = 500", "replicates = 200");
    let cfg = write(dir.path(), "breach.toml", &text);
    let out = sfde(&["check"], &cfg);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn manifest_regenerates_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{BASE}{PATH_SPECS}"));
    let first = dir.path().join("first.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_sfde"))
        .args(["price", "--antithetic", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&first)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = dir.path().join("first.csv.manifest");
    let again = dir.path().join("again.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_sfde"))
        .args(["price", "--config"])
        .arg(&manifest)
        .arg("--out")
        .arg(&again)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(&first).unwrap(), fs::read(&again).unwrap());
    let a = fs::read_to_string(&manifest).unwrap();
    let b = fs::read_to_string(dir.path().join("again.csv.manifest")).unwrap();
    assert_eq!(manifest_value(&a, "config_hash"), manifest_value(&b, "config_hash"));
    assert_eq!(field(&fs::read_to_string(&first).unwrap(), 1, 0), "nested_h");
}

#[test]
fn pricing_from_a_simulated_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{BASE}{PATH_SPECS}"));
    let dump = dir.path().join("path.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_sfde"))
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dump)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(&dump).unwrap();
    assert!(text.starts_with("t,price\n-0.75,100\n"));

    // closed form inside the last delay period, nested before it
    for (t, method) in [("0.875", "closed_form"), ("0.5", "nested_h")] {
        let priced = format!("{BASE}{PATH_SPECS}\n[pricing]\nt = {t}\nprefix = \"path.csv\"\n");
        let cfg = write(dir.path(), "p.toml", &priced);
        let out = sfde(&["price"], &cfg);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = String::from_utf8(out.stdout).unwrap();
        assert_eq!(field(&csv, 1, 0), method);
        let price: f64 = field(&csv, 1, 1).parse().unwrap();
        assert!(price.is_finite() && price >= 0.0);
    }
}

#[test]
fn initial_path_from_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "theta.csv", "offset,price\n-0.5,90\n-0.25,95\n0,100\n");
    let text = format!("{BASE}{CONSTANT_SPECS}").replace(
        "[initial_path]\nlevel = 100",
        "[initial_path]\nkind = \"file\"\npath = \"theta.csv\"",
    );
    let cfg = write(dir.path(), "c.toml", &text);
    let out = sfde(&["simulate"], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.contains("\n-0.5,90\n"), "{csv}");
    assert!(csv.contains("\n0,100\n"));
    let manifest = String::from_utf8(out.stderr).unwrap();
    assert!(manifest.contains("initial_path.kind = \"values\""));
}

#[test]
fn hedge_and_converge_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}{CONSTANT_SPECS}").replace("replicates = 500", "replicates = 50");
    let cfg = write(dir.path(), "c.toml", &text);
    let out = sfde(&["hedge"], &cfg);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("path,terminal_error,payoff,terminal_wealth"));
    assert_eq!(csv.lines().count(), 51);

    let out = sfde(&["converge"], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv, "k,discrepancy,std_error\n2,0,0\n4,0,0\n8,0,0\n16,0,0\n");
    let manifest = String::from_utf8(out.stderr).unwrap();
    assert_eq!(manifest_value(&manifest, "degenerate"), "true");
}
