use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_onebit-dmimo"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("onebit-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_maxmin(out: &Path) -> Output {
    bin()
        .args(["maxmin", "-o"])
        .arg(out)
        .args([
            "-s",
            "geometry.num_rrh=2",
            "-s",
            "geometry.antennas=8",
            "-s",
            "geometry.num_ue=2",
            "-s",
            "geometry.layout=line",
            "-s",
            "experiment.start=0",
            "-s",
            "experiment.stop=10",
            "-s",
            "experiment.step=10",
            "-s",
            "experiment.dithering=off",
        ])
        .output()
        .unwrap()
}

#[test]
fn unknown_key_exits_with_config_code() {
    let out = bin()
        .args(["sndr-sweep", "-s", "geometry.antenas=8"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("geometry.antenas"));
}

#[test]
fn bad_value_in_file_reports_its_line() {
    let dir = scratch("badline");
    let path = dir.join("bad.cfg");
    std::fs::write(
        &path,
        "# comment\ngeometry.antennas = 8\ngeometry.num_ue = many\n",
    )
    .unwrap();
    let out = bin().args(["maxmin", "-c"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unknown_suite_exits_with_config_code() {
    let out = bin()
        .args(["validate", "--only", "nonsense"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn override_wins_over_file() {
    let dir = scratch("override");
    let path = dir.join("a.cfg");
    std::fs::write(&path, "geometry.antennas = 16\n").unwrap();
    let out = bin()
        .args(["ser", "--print-config", "-c"])
        .arg(&path)
        .args(["-s", "geometry.antennas=8"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.lines()
            .any(|l| l.replace(' ', "") == "geometry.antennas=8"),
        "{text}"
    );
}

#[test]
fn run_then_rederive_and_detect_tampering() {
    let dir = scratch("run");
    let out = small_maxmin(&dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("manifest.txt").exists());
    assert!(dir.join("config.txt").exists());

    let ok = bin()
        .args(["validate", "--rederive"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stdout)
    );

    // Perturb one logged power; the SINDR on that row no longer follows.
    let csv = dir.join("maxmin_bmrc_nodither.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|h| *h == "rho_dbm_0").unwrap();
    let mut fields: Vec<String> = lines[1].split(',').map(String::from).collect();
    let v: f64 = fields[col].parse().unwrap();
    fields[col] = format!("{:.17e}", v + 1.0);
    lines[1] = fields.join(",");
    std::fs::write(&csv, lines.join("\n") + "\n").unwrap();

    let bad = bin()
        .args(["validate", "--rederive"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
