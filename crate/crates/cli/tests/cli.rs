//! End-to-end smoke tests of the `explore` binary: exit codes, artifact
//! schemas, determinism, and config-file/flag precedence.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_explore"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("explore-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn solve_is_deterministic_and_matches_reference() {
    let dir = tmp_dir("solve");
    let run = |out: &Path| {
        let status = bin()
            .args(["solve", "--env", "single-chain", "--kind", "frobenius", "--xi", "0"])
            .args(["--zeta", "1", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        read(&out.join("solve/solutions.csv"))
    };
    let a = run(&dir.join("a"));
    let b = run(&dir.join("b"));
    assert_eq!(a, b, "same command must emit byte-identical CSVs");
    let row = a.lines().nth(1).unwrap();
    let h_state: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    assert!((h_state - 0.984).abs() < 0.01, "h_state {h_state}");
    assert!(a.starts_with("kind,xi,zeta,objective,h_state,h_state_action,min_d,gap,bound\n"));
    assert!(dir.join("a/solve/policy-frobenius.txt").exists());
}

#[test]
fn exit_codes_distinguish_config_and_runtime_failures() {
    let dir = tmp_dir("exit");
    let code = |args: &[&str]| {
        bin().args(args).arg("--out").arg(&dir).output().unwrap().status.code().unwrap()
    };
    assert_eq!(code(&["solve", "--env", "nope"]), 1, "unknown env is a config error");
    assert_eq!(code(&["solve", "--xi", "99"]), 1, "out-of-range xi is a config error");
    assert_eq!(code(&["--definitely-not-a-flag"]), 1, "bad flag is a config error");
    // xi above 1/|A| passes static validation but fails in the solver
    assert_eq!(code(&["solve", "--env", "single-chain", "--xi", "0.9"]), 2);
    assert_eq!(code(&["solve", "--env", "single-chain", "--xi", "0.1"]), 0);
}

#[test]
fn config_file_merges_and_flags_win() {
    let dir = tmp_dir("config");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "env = single-chain\nsize = 6\nkind = column-sum\nxi = 0\n# comment\n")
        .unwrap();
    let out = dir.join("out");
    let status = bin()
        .arg("solve")
        .arg("--config")
        .arg(&cfg)
        .args(["--xi", "0.1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(&out.join("solve/solutions.csv"));
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("column-sum,0.100000,"), "flag xi must beat file xi: {row}");
}

#[test]
fn explore_emits_per_seed_and_aggregate_curves() {
    let dir = tmp_dir("explore");
    let status = bin()
        .args(["explore", "--env", "single-chain", "--size", "6", "--algorithm", "countbased"])
        .args(["--max-iters", "15", "--n-seeds", "2", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let base = dir.join("explore-countbased-single-chain");
    for seed_file in ["seed_000.csv", "seed_001.csv"] {
        let text = read(&base.join(seed_file));
        assert!(text
            .starts_with("iter,samples,h_state,h_state_action,min_d,spectral_gap,model_error,solve_seconds\n"));
        assert_eq!(text.lines().count(), 16, "header plus one row per iteration");
    }
    let agg = read(&base.join("aggregate.csv"));
    assert!(agg.starts_with("iter,n_seeds,h_state_mean,h_state_ci95,min_d_mean,min_d_ci95\n"));
    assert!(agg.lines().skip(1).all(|l| l.split(',').nth(1) == Some("2")));
    assert!(read(&base.join("h_state.svg")).starts_with("<svg"));
}

#[test]
fn sweeps_and_bench_emit_expected_schemas() {
    let dir = tmp_dir("sweep");
    let status = bin()
        .args(["sweep-xi", "--env", "single-chain", "--size", "6", "--kind", "frobenius"])
        .args(["--grid", "3", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let sweep = read(&dir.join("sweep-xi/sweep.csv"));
    assert!(sweep.starts_with("kind,xi,objective,h_state,h_state_action\n"));
    assert_eq!(sweep.lines().count(), 4);
    // the xi = 1/|A| endpoint forces the uniform policy
    let last = sweep.lines().last().unwrap();
    assert!(last.starts_with("frobenius,0.5"), "endpoint row: {last}");

    let status = bin()
        .args(["bench", "--kind", "column-sum", "--size-ladder", "8,2", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let bench = read(&dir.join("bench/times.csv"));
    assert!(bench.starts_with("n_states,n_actions,variables,kind,seconds,ok\n"));
    let row = bench.lines().nth(1).unwrap();
    assert!(row.starts_with("8,2,24,column-sum,"));
    assert!(row.ends_with(",true"));
    let seconds: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    assert!(seconds > 0.0);
}
