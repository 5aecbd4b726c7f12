use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use cgle_cli::{run, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_PASS, EXIT_VIOLATION};

const VOLUME: &str = r#"
name = "volume"
boundary = "neumann"
length = 1.0
resolution = 65
controller = "volume"
lambda = 1.0
gamma = 0.1
mu = 1.0
n_controllers = 2
alpha = 0.5
beta = 0.5
seed = 7
t_final = 2.0
dt = 0.001
"#;

const MODAL: &str = r#"
name = "modal"
controller = "modal"
lambda = 1.0
gamma = 0.5
mu = 1.0
n_controllers = 1
kappa = 1.0
beta = 1.0
alpha = 1.0
seed = 3
t_final = 1.0
dt = 0.001
"#;

const ORACLE: &str = r#"
name = "oracle"
controller = "modal"
alpha = 2.0
gamma = 0.5
mu = 1.0
kappa = 0.0
beta = 0.0
linear_oracle = true
initial = "single_mode"
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn invoke(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = run(std::iter::once("cgle").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.toml", VOLUME);
    let (code, text) = invoke(&["certify", "--config", good.to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS);
    assert!(text.contains("0.175000000"), "{text}");

    let bad = write_config(dir.path(), "bad.toml", &VOLUME.replace("n_controllers = 2", "n_controllers = 1"));
    let (code, text) = invoke(&["certify", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_HYPOTHESIS);
    assert!(text.contains("-0.400000000"), "{text}");
    assert!(text.contains("cell_resolution"));

    let broken = write_config(dir.path(), "broken.toml", "lambda = = 1");
    assert_eq!(invoke(&["certify", "--config", broken.to_str().unwrap()]).0, EXIT_CONFIG);
}

#[test]
fn zero_data_gives_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "zero.toml",
        &format!("{MODAL}\ninitial = \"constant\"\n"),
    );
    let out = dir.path().join("out");
    let (code, _) = invoke(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS);
    let csv = fs::read_to_string(out.join("modal.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,l2_sq,h1_semi_sq,lpp,envelope,z_l2_sq,v_l2_sq");
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 7);
        for c in &cells[1..5] {
            assert_eq!(c.parse::<f64>().unwrap(), 0.0);
        }
        assert_eq!(cells[5], "");
        assert_eq!(cells[6], "");
        rows += 1;
    }
    assert_eq!(rows, 11);
}

#[test]
fn csv_is_bit_stable_and_record_parses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "modal.toml", MODAL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let (code, _) = invoke(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_PASS);
    }
    let csv_a = fs::read(a.join("modal.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("modal.csv")).unwrap());

    let first_row = String::from_utf8(csv_a).unwrap().lines().nth(1).unwrap().to_string();
    let l2 = first_row.split(',').nth(1).unwrap();
    // 17 significant digits in scientific notation.
    let mantissa = l2.split('e').next().unwrap();
    assert_eq!(mantissa.replace(['.', '-'], "").len(), 17, "{l2}");

    let record: toml::Value = fs::read_to_string(a.join("modal.record.toml")).unwrap().parse().unwrap();
    assert_eq!(record["exit_code"].as_integer(), Some(0));
    assert_eq!(record["trajectory_file"].as_str(), Some("modal.csv"));
    assert_eq!(record["certificate"]["theorem"].as_str(), Some("modal L2 decay"));
    assert_eq!(record["verification"]["passed"].as_bool(), Some(true));
    assert_eq!(record["config"]["controller"].as_str(), Some("modal"));
}

#[test]
fn unsatisfied_runs_need_force() {
    let dir = tempfile::tempdir().unwrap();
    let text = ORACLE.replace("gamma = 0.5", "gamma = 1.5").replace("mu = 1.0", "mu = 0.0") + "t_final = 2.0\n";
    let cfg = write_config(dir.path(), "grow.toml", &text);
    let out = dir.path().join("out");
    let args = ["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(invoke(&args).0, EXIT_HYPOTHESIS);
    let mut forced = args.to_vec();
    forced.push("--force");
    let (code, text) = invoke(&forced);
    assert_eq!(code, EXIT_VIOLATION, "{text}");
    let record: toml::Value = fs::read_to_string(out.join("experiment.record.toml"))
        .or_else(|_| fs::read_to_string(out.join("oracle.record.toml")))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(record["certificate"]["forced"].as_bool(), Some(true));
}

#[test]
fn steering_rows_carry_target_columns() {
    let dir = tempfile::tempdir().unwrap();
    let text = MODAL
        .replace("controller = \"modal\"", "controller = \"steering-any\"")
        .replace("kappa = 1.0", "kappa = 2.0");
    let cfg = write_config(dir.path(), "steer.toml", &text);
    let out = dir.path().join("out");
    let (code, _) = invoke(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS);
    let csv = fs::read_to_string(out.join("modal.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert!(!cells[5].is_empty() && !cells[6].is_empty());
        let z: f64 = cells[5].parse().unwrap();
        let env: f64 = cells[4].parse().unwrap();
        assert!(z <= env * (1.0 + 1.1e-5));
    }
}

fn sweep_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let modal = write_config(dir.path(), "modal.toml", MODAL);
    let out = dir.path().join("out");
    let (code, text) = invoke(&[
        "sweep", "--config", modal.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--param", "n_controllers", "--range", "1:8:8", "--certify-only",
    ]);
    assert_eq!(code, EXIT_PASS);
    let omegas: Vec<f64> = sweep_rows(&text).iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(omegas.len(), 8);
    assert!(omegas.windows(2).all(|w| w[1] >= w[0]), "{omegas:?}");
    assert!(out.join("modal_sweep_n_controllers.csv").exists());

    // Feasibility flips at μ = 4γ/(1 − 1/N²) = 0.4/0.75.
    let volume = write_config(dir.path(), "volume.toml", VOLUME);
    let (code, text) = invoke(&[
        "sweep", "--config", volume.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--param", "mu", "--range", "0.1:2.0:20", "--certify-only",
    ]);
    assert_eq!(code, EXIT_PASS);
    let flip = 0.4 / 0.75;
    for row in sweep_rows(&text) {
        let mu: f64 = row[0].parse().unwrap();
        assert_eq!(row[1] == "true", mu > flip, "mu = {mu}");
        assert_eq!(row[3], "");
    }

    let fitted = write_config(
        dir.path(),
        "fitted.toml",
        &MODAL.replace("t_final = 1.0", "t_final = 2.0\nsample_every = 0.05"),
    );
    let (code, text) = invoke(&[
        "sweep", "--config", fitted.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--param", "mu", "--values", "1.0,2.0",
    ]);
    assert_eq!(code, EXIT_PASS);
    for row in sweep_rows(&text) {
        assert!(row[3].parse::<f64>().unwrap() > 1.5);
    }

    let empty = invoke(&[
        "sweep", "--config", modal.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--param", "mu", "--range", "0:1:0",
    ]);
    assert_eq!(empty.0, EXIT_CONFIG);
    let unknown = invoke(&[
        "sweep", "--config", modal.to_str().unwrap(), "--param", "zeta", "--values", "1",
    ]);
    assert_eq!(unknown.0, EXIT_CONFIG);
}

#[test]
fn converge_table() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = write_config(dir.path(), "oracle.toml", ORACLE);
    let out = dir.path().join("out");
    let (code, text) = invoke(&[
        "converge", "--config", oracle.to_str().unwrap(), "--out", out.to_str().unwrap(), "--dt", "0.01",
    ]);
    assert_eq!(code, EXIT_PASS);
    let rows = sweep_rows(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2], "");

    let (code, text) = invoke(&[
        "converge", "--config", oracle.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--dt", "0.01,0.005,0.0025",
    ]);
    assert_eq!(code, EXIT_PASS);
    for row in &sweep_rows(&text)[1..] {
        assert!(row[2].parse::<f64>().unwrap() >= 1.9);
    }

    let nonlinear = write_config(dir.path(), "nl.toml", &ORACLE.replace("kappa = 0.0", "kappa = 1.0"));
    let (code, _) = invoke(&["converge", "--config", nonlinear.to_str().unwrap(), "--dt", "0.01"]);
    assert_eq!(code, EXIT_HYPOTHESIS);
}

#[test]
fn binary_propagates_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", &VOLUME.replace("n_controllers = 2", "n_controllers = 1"));
    let status = Command::new(env!("CARGO_BIN_EXE_cgle"))
        .args(["certify", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_HYPOTHESIS));
    assert!(String::from_utf8_lossy(&status.stdout).contains("cell_resolution"));

    let status = Command::new(env!("CARGO_BIN_EXE_cgle")).arg("--help").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_PASS));
}
