//! End-to-end runs of the `wpt-relay` binary.

use std::path::Path;
use std::process::{Command, Output};

use wpt_relay::experiments::{BEST_RHO_FILE, PLOT_FILE, TABLE_FILE};
use wpt_relay::table::read_results_table;

fn run(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wpt-relay"));
    cmd.args(args).env_remove("WPT_RELAY_SEED");
    if let Some(s) = env_seed {
        cmd.env("WPT_RELAY_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn rejects_out_of_range_rho() {
    let o = run(&["single", "--rho", "1.5"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rho must be in (0,1)"));
}

#[test]
fn unknown_flag_prints_usage() {
    let o = run(&["single", "--frobnicate"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn bad_config_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[sweep]\nratio_grid = [0.5, 1.5]\n").unwrap();
    let o = run(&["single", "--config", path.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ratio must be in (0,1)"));

    std::fs::write(&path, "[system]\nnope = 1\n").unwrap();
    let o = run(&["single", "--config", path.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope"));
}

#[test]
fn single_prints_every_scheme() {
    let o = run(&["single", "--seed", "1"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "scheme,rate_exact,rate_highsnr,iterations,converged,lambda_f,lambda_rs_tilde");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("p3b,") && rows[3].starts_with("noef,"));
}

#[test]
fn seed_falls_back_to_environment() {
    let from_env = run(&["single", "--scheme", "noef"], Some("9"));
    let from_flag = run(&["single", "--scheme", "noef", "--seed", "9"], None);
    let default = run(&["single", "--scheme", "noef"], None);
    assert_eq!(from_env.stdout, from_flag.stdout);
    assert_ne!(from_env.stdout, default.stdout);
    let flag_wins = run(&["single", "--scheme", "noef", "--seed", "9"], Some("3"));
    assert_eq!(flag_wins.stdout, from_flag.stdout);
    assert_eq!(run(&["single"], Some("x")).status.code(), Some(2));
}

#[test]
fn sweep_writes_readable_outputs_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let o =
        run(&["sweep-rho", "--trials", "3", "--seed", "4", "--scheme", "p3b", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [TABLE_FILE, BEST_RHO_FILE, PLOT_FILE] {
        assert!(out.join(f).exists(), "{f}");
    }
    let table = read_results_table(&out.join(TABLE_FILE)).unwrap();
    assert_eq!(table.rows.len(), 49);
    assert!(table.metadata.iter().any(|m| m.starts_with("config_sha256: ")));

    // the echoed config replays to the same table
    let text = std::fs::read_to_string(out.join(TABLE_FILE)).unwrap();
    let start = text.lines().position(|l| l.starts_with("# config (")).unwrap();
    let replay: String = text
        .lines()
        .skip(start + 1)
        .take_while(|l| l.starts_with('#'))
        .map(|l| format!("{}\n", l.trim_start_matches('#').strip_prefix("   ").unwrap_or("")))
        .collect();
    let cfg = dir.path().join("replay.toml");
    std::fs::write(&cfg, replay).unwrap();
    let out_b = dir.path().join("b");
    let o = run(&["sweep-rho", "--config", cfg.to_str().unwrap(), "--out", out_b.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(out.join(TABLE_FILE)).unwrap(), std::fs::read(out_b.join(TABLE_FILE)).unwrap());
}

#[test]
fn validate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["validate", "--seed", "7", "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(Path::new(dir.path()).join("oracles.csv")).unwrap();
    assert!(csv.lines().filter(|l| !l.starts_with('#')).skip(1).all(|l| l.contains(",true,")));
}
