use std::path::Path;
use std::process::{Command, Output};

fn levcomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levcomp")).args(args).output().expect("spawn levcomp")
}

fn ok(args: &[&str]) -> String {
    let out = levcomp(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_sample_complete_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.txt");
    let obs = dir.path().join("obs.txt");
    let out = dir.path().join("x.txt");
    ok(&["generate", "--n", "30", "--r", "2", "--alpha", "0.3", "--seed", "4", "-o", p(&m)]);
    ok(&["sample", "--matrix", p(&m), "--scheme", "uniform", "--count", "600", "--seed", "1", "-o", p(&obs)]);
    let header = std::fs::read_to_string(&obs).unwrap();
    assert!(header.starts_with("30 30 600\n"));
    let summary: serde_json::Value = serde_json::from_str(ok(&["complete", "--obs", p(&obs), "-o", p(&out)]).trim()).unwrap();
    assert_eq!(summary["converged"], true);
    let x = std::fs::read_to_string(&out).unwrap();
    assert!(x.starts_with("30 30\n"));
    assert_eq!(x.lines().count(), 31);
}

#[test]
fn leverage_sampling_keeps_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.txt");
    let obs = dir.path().join("obs.txt");
    ok(&["generate", "--n", "20", "--r", "2", "--alpha", "0.5", "-o", p(&m)]);
    ok(&["sample", "--matrix", p(&m), "--rank", "2", "--count", "150", "-o", p(&obs)]);
    let text = std::fs::read_to_string(&obs).unwrap();
    assert!(text.lines().skip(1).all(|l| l.split_whitespace().count() == 4));
}

#[test]
fn twophase_emits_one_line_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.txt");
    ok(&["generate", "--n", "30", "--r", "2", "-o", p(&m)]);
    let out = ok(&["twophase", "--matrix", p(&m), "--rank", "2", "--budget", "500", "--trials", "2"]);
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["phase_one_samples"], 333);
    assert_eq!(lines[0]["phase_two_samples"], 167);
}

#[test]
fn lowerbound_writes_pair_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (m0, m1, s) = (dir.path().join("m0"), dir.path().join("m1"), dir.path().join("s.json"));
    ok(&[
        "lowerbound", "--n", "24", "--r", "3", "--a", "1.3333333333333333,2,4", "--b", "2,2,2", "--trials", "200",
        "--m0", p(&m0), "--m1", p(&m1), "--summary", p(&s),
    ]);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&s).unwrap()).unwrap();
    assert_eq!(summary["result"]["trials"], 200);
    assert!(std::fs::read_to_string(&m1).unwrap().starts_with("24 24\n"));
}

#[test]
fn sweep_is_deterministic_and_overridable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "[experiment]\nn = 20\nr = 1\nalpha = 0.0\nscheme = \"uniform\"\nsample_grid = [200, 400]\ntrials = 3\n",
    )
    .unwrap();
    let a = ok(&["sweep", "--config", p(&cfg)]);
    let b = ok(&["sweep", "--config", p(&cfg)]);
    assert_eq!(a, b);
    assert!(a.starts_with("scheme,alpha,beta,n,r,m,trials,success_frac,ci_halfwidth,median_rel_err,mean_samples,seconds\n"));
    let c = ok(&["sweep", "--config", p(&cfg), "--scheme", "oracle-leverage", "--trials", "2"]);
    assert!(c.lines().skip(1).all(|l| l.starts_with("oracle-leverage,") && l.split(',').nth(6) == Some("2")));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "2 2\n1 2\n3\n").unwrap();
    let out = levcomp(&["sample", "--matrix", p(&bad), "--scheme", "uniform", "--count", "1", "-o", p(&dir.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[experiment]\ntrials = -1\n").unwrap();
    assert!(!levcomp(&["sweep", "--config", p(&cfg)]).status.success());
}
