use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_barrier-repl")).args(args).output().expect("binary runs")
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const PRICE: &str = r#"
command = "price"
seed = 3

[claim]
kind = "sbko"
spot = 110.0
lower = 90.0
k = 1

[model]
kind = "constant"
sigma = 0.2

[numerics]
oracle = true
mc_paths = 4000
steps = 64
"#;

fn json_out(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn price_reports_diagnostics_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "p.toml", PRICE);
    let v = json_out(&run(&["--config", &cfg]));
    assert_eq!(v["diagnostics"]["smoothing_n"], 25);
    assert_eq!(v["diagnostics"]["terms"].as_array().unwrap().len(), 2);
    assert!(v["diagnostics"]["terms"][0]["omega_i"].is_f64());
    let p = v["price"][0].as_f64().unwrap();
    let mc = &v["oracle"];
    assert!((p - mc["mean"][0].as_f64().unwrap()).abs() < 4.0 * mc["std_error"].as_f64().unwrap() + 1e-3);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "p.toml", PRICE);
    let a = json_out(&run(&["--config", &cfg]));
    let b = json_out(&run(&["--config", &cfg, "--seed", "3"]));
    let c = json_out(&run(&["--config", &cfg, "--seed", "4"]));
    assert_eq!(a, b);
    assert_eq!(c["oracle"]["seed"], 4);
    assert_ne!(a["oracle"]["mean"], c["oracle"]["mean"]);
    // the formula price does not depend on the seed under deterministic vol
    assert_eq!(a["price"], c["price"]);
}

#[test]
fn json_config_is_equivalent_to_toml() {
    let dir = tempfile::tempdir().unwrap();
    let toml_cfg = write(&dir, "p.toml", PRICE);
    let parsed: toml::Value = toml::from_str(PRICE).unwrap();
    let json_cfg = write(&dir, "p.json", &serde_json::to_string(&parsed).unwrap());
    assert_eq!(run(&["--config", &toml_cfg]).stdout, run(&["--config", &json_cfg]).stdout);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "c.toml", "command = \"curve\"\n[claim]\nkind = \"sbko\"\nspot = 110.0\nlower = 90.0\nk = 1\n[curve]\ns_min = 80.0\ns_max = 120.0\npoints = 9\n");
    let out = dir.path().join("c.csv");
    let o = run(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("S,payoff_real,payoff_imag\n"));
    assert_eq!(text.lines().count(), 10);
    // json rendering of the same curve
    let v = json_out(&run(&["--config", &cfg, "--format", "json"]));
    assert_eq!(v["points"].as_array().unwrap().len(), 9);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(&dir, "a.toml", "command = \"price\"\nbogus = 1\n");
    assert_eq!(run(&["--config", &unknown]).status.code(), Some(2));
    let bad_barrier = write(&dir, "b.toml", &PRICE.replace("lower = 90.0", "lower = 120.0"));
    assert_eq!(run(&["--config", &bad_barrier]).status.code(), Some(2));
    let missing = write(&dir, "c.toml", "command = \"hedge\"\n[model]\nkind = \"constant\"\nsigma = 0.2\n");
    assert_eq!(run(&["--config", &missing]).status.code(), Some(2));
    assert_eq!(run(&["--config", "/nonexistent/x.toml"]).status.code(), Some(2));
}

#[test]
fn broken_branch_fixture_exits_4_with_report() {
    let cfg = root().join("configs/verify_broken_branch.toml");
    let o = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["all_passed"], false);
    let failed: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["branch_normalization"]);
}

#[test]
fn verify_passes_on_deterministic_vol() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(root().join("configs/verify_deterministic.toml"))
        .unwrap()
        .replace("mc_paths = 100000", "mc_paths = 20000");
    let cfg = write(&dir, "v.toml", &text);
    let v = json_out(&run(&["--config", &cfg]));
    assert_eq!(v["all_passed"], true, "{v:#}");
}

#[test]
fn span_csv_columns_and_log_weights() {
    let cfg = root().join("configs/span_log.toml");
    let o = run(&["--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let mut rd = csv::Reader::from_reader(&o.stdout[..]);
    assert_eq!(rd.headers().unwrap(), vec!["instrument_type", "strike", "weight"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(&rows[0][0], "bond");
    assert_eq!(&rows[1][0], "forward");
    assert!((rows[1][2].parse::<f64>().unwrap() + 0.02).abs() < 1e-10);
    assert!(rows.iter().skip(2).all(|r| &r[0] == "put" || &r[0] == "call"));
}

#[test]
fn hedge_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir,
        "h.toml",
        r#"
command = "hedge"
seed = 1
[model]
kind = "constant"
sigma = 0.2
[hedge]
paths = 20
steps = 64
rebalances = [16, 64]
cases = [{ n = 0, m = 1, omega = [0.0, 0.0], s = [0.0, 0.0] }]
"#,
    );
    let v = json_out(&run(&["--config", &cfg]));
    assert_eq!(v["cases"][0]["rms"].as_array().unwrap().len(), 2);
    assert!(v["cases"][0]["slope"].is_f64());
    assert!(v["variance_swap_share_notional_max_deviation"].as_f64().unwrap() < 1e-10);
}
