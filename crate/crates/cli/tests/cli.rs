use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const KINGMAN: &str = r#"
model = "kingman"

[grid]
x_min = 1e-6
x_max = 1.0
n = 1024

[kingman]
beta_mut = 0.3
alpha_u = 1.0

[initial]
alpha0 = 2.0
mass = 1.0

[run]
t_end = 400.0
snapshot_times = [100.0]
"#;

const BSP: &str = r#"
model = "bsp"

[grid]
x_max = 50.0
n = 256

[bsp]
beta_temp = 1.0
chat = { c0 = 1.0, a = 1.0 }

[initial]
alpha0 = 1.0
mass = 0.5
decay = 1.0

[run]
t_end = 1.0
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn condensate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condensate")).args(args).output().unwrap()
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    condensate(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn kingman_benchmark_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), KINGMAN);
    let out = dir.path().join("out");
    let o = run("simulate", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["timeseries.csv", "profile_t400.csv", "profile_t400.gp", "fit.json", "snapshot_t100.csv", "snapshot_t400.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let fit = json(&out.join("fit.json"));
    let gamma_hat = fit["gamma_hat"].as_f64().unwrap();
    assert!((0.9..=1.1).contains(&gamma_hat), "{gamma_hat}");
    let header = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert!(header.starts_with("t,total_mass,b0,w_log,Q_t,dt,min_density\n"));

    let again = dir.path().join("again");
    assert_eq!(run("simulate", &cfg, &again, &[]).status.code(), Some(0));
    for f in ["timeseries.csv", "profile_t400.csv", "fit.json"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f} differs between runs");
    }

    let o = run("fit", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json(&out.join("fit.json"))["gamma_hat"].as_f64(), Some(gamma_hat));
}

#[test]
fn out_of_range_parameter_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &KINGMAN.replace("beta_mut = 0.3", "beta_mut = 1.5"));
    let o = run("simulate", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("beta_mut"), "{}", stderr(&o));
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &KINGMAN.replace("[run]", "[run]\nt_stop = 3.0"));
    assert_eq!(run("simulate", &cfg, &dir.path().join("out"), &[]).status.code(), Some(2));
}

#[test]
fn missing_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("simulate", &dir.path().join("nope.toml"), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn zero_horizon_writes_initial_snapshot_only() {
    let dir = tempfile::tempdir().unwrap();
    let text = KINGMAN.replace("t_end = 400.0\nsnapshot_times = [100.0]", "t_end = 0.0");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = run("simulate", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("snapshot_t0.csv").exists());
    assert!(!out.join("fit.json").exists());
    let meta = json(&out.join("snapshot_t0.json"));
    assert!((meta["total_mass"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn blow_up_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = KINGMAN.replace("[run]", "[stepper]\ndt_init = 1e-3\ndt_max = 2.0\nrtol = 1e-7\natol = 1e-10\nblowup_cap = 1.5\n\n[run]");
    let cfg = write_config(dir.path(), &text);
    let o = run("simulate", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn verify_default_configs_pass() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [("kingman", KINGMAN), ("bsp", BSP)] {
        let cfg = write_config(dir.path(), text);
        let out = dir.path().join(name);
        let o = run("verify", &cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stdout));
        let report = json(&out.join("verify.json"));
        assert_eq!(report["all_pass"], Value::Bool(true));
    }
}

#[test]
fn verify_coarse_grid_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &KINGMAN.replace("n = 1024", "n = 16"));
    let out = dir.path().join("out");
    let o = run("verify", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(4));
    let report = json(&out.join("verify.json"));
    assert_eq!(report["all_pass"], Value::Bool(false));
}

#[test]
fn verify_detects_kms_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BSP.replace("a = 1.0 }", "a = 1.0, kms_beta = 1.001 }"));
    let out = dir.path().join("out");
    let o = run("verify", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(4));
    let report = json(&out.join("verify.json"));
    let kms = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "kms_identity").unwrap();
    assert_eq!(kms["pass"], Value::Bool(false));
}

#[test]
fn sweep_alpha0_follows_the_shape_dichotomy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), KINGMAN);
    let out = dir.path().join("sweep");
    let o = run("sweep", &cfg, &out, &["--param", "alpha0", "--values", "0.5,1.0,2.0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("value,beta_hat,gamma_hat,rho_estimate"));
    let beta: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    for (b, expected) in beta.iter().zip([0.5, 1.0, 1.0]) {
        assert!((b - expected).abs() < 0.1, "{b} vs {expected}");
    }
    assert!(out.join("alpha0_0.5").join("fit.json").exists());
}

#[test]
fn sweep_rejects_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), KINGMAN);
    let out = dir.path().join("sweep");
    assert_eq!(run("sweep", &cfg, &out, &["--param", "alpha0", "--values", ""]).status.code(), Some(2));
    assert_eq!(run("sweep", &cfg, &out, &["--param", "gamma", "--values", "1.0"]).status.code(), Some(2));
    assert_eq!(run("sweep", &cfg, &out, &["--param", "eta", "--values", "0.1"]).status.code(), Some(2));
}

#[test]
fn bad_thread_count_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), KINGMAN);
    let o = Command::new(env!("CARGO_BIN_EXE_condensate"))
        .args(["stationary", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .env("CONDENSATE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
