use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gamma_smoothness::harness::svg::check_well_formed;

fn gsmooth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsmooth")).args(args).output().expect("spawn gsmooth")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn quick_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.toml")
}

#[test]
fn gamma_eval_and_inverse_round_trip() {
    let o = gsmooth(&["gamma", "eval", "0,1,2,3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "x,gamma");
    assert_eq!(rows[1], "0,0");
    assert_eq!(rows[2], "1,1");
    let o = gsmooth(&["gamma", "inverse", "0.5,2.5"]);
    assert!(o.status.success());
    for line in stdout(&o).lines().skip(1) {
        let (y, x) = line.split_once(',').unwrap();
        let (y, x): (f64, f64) = (y.parse().unwrap(), x.parse().unwrap());
        let back = gsmooth(&["gamma", "eval", &x.to_string()]);
        let g: f64 = stdout(&back).lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert!((g - y).abs() < 1e-12, "{y} -> {x} -> {g}");
    }
}

#[test]
fn bad_gamma_spec_is_a_usage_error() {
    let o = gsmooth(&["gamma", "eval", "--beta", "0.5", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn modulus_and_kfunc_emit_their_schemas() {
    let o = gsmooth(&["modulus", "-f", "exp_decay", "-r", "1", "-p", "inf", "-t", "0.02,0.01"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("function_id,r,p,alpha,t,omega_main,tail_zero,tail_infinity,omega_complete,status"));
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",ok")));

    let o = gsmooth(&["kfunc", "-f", "zero", "-t", "0.02"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 3);

    let o = gsmooth(&["modulus", "-f", "no_such_function", "-t", "0.02"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_and_detects_an_injected_fault() {
    let o = gsmooth(&["verify", "weights"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("[FAIL]"));

    let o = gsmooth(&["verify", "weights", "--inject", "flip-c1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("[FAIL]"));
}

#[test]
fn run_is_deterministic_and_writes_well_formed_charts() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for k in 0..2 {
        let csv = dir.path().join(format!("run{k}.csv"));
        let svg = dir.path().join(format!("run{k}.svg"));
        let o = gsmooth(&[
            "run",
            quick_config().to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
            "--svg",
            svg.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        for side in ["modulus", "kfunc", "summary"] {
            assert!(dir.path().join(format!("run{k}.{side}.csv")).exists());
        }
        check_well_formed(&std::fs::read_to_string(&svg).unwrap()).unwrap();
        csvs.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs.remove(0)).unwrap();
    assert!(text.lines().next().unwrap().starts_with("function_id,r,p,alpha,t,omega_main"));
    assert_eq!(text.lines().count(), 1 + 4 * 4);
}

#[test]
fn run_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[grid]\nr = [1]\np = [2]\nalpha = [0]\nbogus = 1\n").unwrap();
    let o = gsmooth(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}
