//! Runs each example binary with small arguments. Cargo builds examples
//! before integration tests, next to the test executable's directory.

use std::path::PathBuf;
use std::process::Command;

fn example(name: &str) -> PathBuf {
    let deps = std::env::current_exe().unwrap();
    let profile = deps.parent().unwrap().parent().unwrap();
    profile
        .join("examples")
        .join(format!("{name}{}", std::env::consts::EXE_SUFFIX))
}

fn run(name: &str, args: &[&str]) -> String {
    let path = example(name);
    assert!(path.exists(), "{} not built", path.display());
    let out = Command::new(&path).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{name} failed:\n{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn sndr_single_rrh_prints_one_maximum_per_curve() {
    let out = run("sndr_single_rrh", &["2"]);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows
        .iter()
        .all(|r| r.split_whitespace().last() == Some("1")));
}

#[test]
fn sndr_two_rrh_dithering_merges_peaks() {
    let out = run("sndr_two_rrh_dithering", &["32"]);
    for line in out
        .lines()
        .filter(|l| l.contains(" dithering:") && !l.contains("no dithering"))
    {
        assert_eq!(line.matches(" dB at ").count(), 1, "{line}");
    }
}

#[test]
fn arcsine_law_check_runs() {
    let out = run("arcsine_law_check", &["20000", "3"]);
    assert_eq!(out.lines().count(), 7);
}

#[test]
fn self_checks_pass() {
    run("self_checks", &[]);
}

#[test]
fn min_power_runs() {
    let out = run("min_power", &["0"]);
    assert_eq!(out.matches("targets_met").count(), 4, "{out}");
}

#[test]
fn max_min_dithering_runs() {
    run("max_min_dithering", &["4", "10"]);
}

#[test]
fn ser_16qam_runs() {
    let out = run("ser_16qam", &["2000", "10"]);
    assert_eq!(out.lines().count(), 4);
}

#[test]
fn sweep_from_config_rederives() {
    let dir = std::env::temp_dir().join(format!("onebit-example-{}", std::process::id()));
    let out = run("sweep_from_config", &[dir.to_str().unwrap()]);
    assert!(out.contains("re-derived 40 rows"), "{out}");
    let _ = std::fs::remove_dir_all(dir);
}
