//! End-to-end checks of the `e91sim` binary: exit codes, report files,
//! diagnostics, and byte-level reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn e91sim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_e91sim"))
        .args(args)
        .current_dir(dir)
        .env_remove("E91SIM_OUT_DIR")
        .output()
        .expect("the binary should start")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn json_file(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Parses a report JSON and drops the manifest timestamp, the one field that
/// may differ between reruns of the same configuration.
fn json_modulo_timestamp(path: &Path) -> serde_json::Value {
    let mut v = json_file(path);
    let removed = v["manifest"].as_object_mut().expect("manifest object").remove("timestamp");
    assert!(removed.is_some(), "{} has no manifest.timestamp", path.display());
    v
}

#[test]
fn presets_lists_every_builtin() {
    let tmp = tempfile::tempdir().unwrap();
    let out = e91sim(tmp.path(), &["presets"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let listing = stdout_of(&out);
    for name in ["genuine", "attack-ideal-linear", "attack-ideal-ideal", "attack-high-energy"] {
        assert!(listing.contains(name), "missing {name} in:\n{listing}");
    }
}

#[test]
fn attack_run_exits_3_and_writes_all_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = e91sim(
        tmp.path(),
        &["run", "attack-ideal-linear", "--rounds", "20000", "--seed", "7", "--out-dir", "reports"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr_of(&out));

    let reports = tmp.path().join("reports");
    for file in ["summary.json", "tallies.csv", "singles.csv", "fair_sampling.json"] {
        assert!(reports.join(file).exists(), "{file} missing");
    }

    let summary = json_file(&reports.join("summary.json"));
    let digest = summary["manifest"]["config_digest"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(summary["manifest"]["scenario"], "attack-ideal-linear");
    assert_eq!(summary["manifest"]["config"]["rounds"], 20000);
    assert_eq!(summary["qber"]["qber"], 0.0);

    let fair = json_file(&reports.join("fair_sampling.json"));
    assert_eq!(fair["alice"]["verdict"], "fail");
    assert_eq!(fair["bob"]["verdict"], "fail");

    let tallies = fs::read_to_string(reports.join("tallies.csv")).unwrap();
    let mut lines = tallies.lines();
    assert!(lines.next().unwrap().starts_with("# scenario=attack-ideal-linear "));
    assert_eq!(lines.next().unwrap(), "a_setting,b_setting,bits,count");
    // 3×3 setting pairs × 4 bit cells.
    assert_eq!(lines.count(), 36);

    let singles = fs::read_to_string(reports.join("singles.csv")).unwrap();
    assert_eq!(singles.lines().nth(1).unwrap(), "station,setting,detector,count,rounds");
    // 2 stations × 3 settings × 4 detectors, plus comment and header.
    assert_eq!(singles.lines().count(), 26);
}

#[test]
fn genuine_run_exits_0() {
    let tmp = tempfile::tempdir().unwrap();
    let out = e91sim(
        tmp.path(),
        &["run", "genuine", "--rounds", "20000", "--seed", "7", "--out-dir", "reports"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("alice Pass, bob Pass"));
}

#[test]
fn starved_fair_sampling_test_exits_4() {
    // 1000 rounds leave each fixed-orientation group far below the minimum
    // count, so both verdicts stay inconclusive.
    let tmp = tempfile::tempdir().unwrap();
    let out = e91sim(
        tmp.path(),
        &["run", "genuine", "--rounds", "1000", "--seed", "7", "--out-dir", "reports"],
    );
    assert_eq!(out.status.code(), Some(4), "{}", stderr_of(&out));
    let fair = json_file(&tmp.path().join("reports/fair_sampling.json"));
    assert_eq!(fair["alice"]["verdict"], "inconclusive");
}

#[test]
fn missing_config_exits_2_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = e91sim(tmp.path(), &["run", "missing.toml", "--out-dir", "reports"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("missing.toml"));
    assert!(!tmp.path().join("reports").exists(), "no reports may be written");
}

#[test]
fn unknown_preset_exits_2_and_lists_alternatives() {
    let tmp = tempfile::tempdir().unwrap();
    let out = e91sim(tmp.path(), &["run", "quantum-ish"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("quantum-ish"), "{err}");
    assert!(err.contains("genuine"), "{err}");
}

const SESSION_TOML: &str = r#"
angle_unit = "degrees"
rounds = 20000
seed = 3
chsh_settings = [[0.0, 22.5], [0.0, 67.5], [45.0, 22.5], [45.0, 67.5]]
key_settings = [22.5, 45.0]

[source]
kind = "classical"
energy_ratio = 2.0

[alice]
settings = [0.0, 22.5, 45.0]
theta_ch1 = 0.0
theta_ch0 = 0.0

[alice.detectors]
kind = "ideal"
threshold = 1.0

[bob]
settings = [22.5, 45.0, 67.5]
theta_ch1 = 22.5
theta_ch0 = 22.5

[bob.detectors]
kind = "linear"
threshold = 1.0
saturation = 2.0
"#;

#[test]
fn config_file_runs_and_takes_cli_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("session.toml"), SESSION_TOML).unwrap();
    let out = e91sim(
        tmp.path(),
        &["run", "session.toml", "--rounds", "25000", "--out-dir", "reports"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr_of(&out));
    let summary = json_file(&tmp.path().join("reports/summary.json"));
    assert_eq!(summary["manifest"]["scenario"], "session");
    assert_eq!(summary["manifest"]["config"]["rounds"], 25000);
    assert_eq!(summary["manifest"]["config"]["seed"], 3);
}

#[test]
fn malformed_config_reports_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let broken = SESSION_TOML.replace("rounds = 20000", "rounds = \"all\"");
    fs::write(tmp.path().join("broken.toml"), broken).unwrap();
    let out = e91sim(tmp.path(), &["run", "broken.toml", "--out-dir", "reports"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("broken.toml"), "{err}");
    assert!(err.contains("line 3"), "{err}");
    assert!(!tmp.path().join("reports").exists());
}

#[test]
fn preset_only_flags_are_rejected_for_config_files() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("session.toml"), SESSION_TOML).unwrap();
    let out = e91sim(tmp.path(), &["run", "session.toml", "--eta", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--eta"), "{}", stderr_of(&out));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str, workers: &str| {
        let out = e91sim(
            tmp.path(),
            &[
                "run",
                "attack-ideal-linear",
                "--rounds",
                "30000",
                "--seed",
                "9",
                "--workers",
                workers,
                "--out-dir",
                dir,
            ],
        );
        assert_eq!(out.status.code(), Some(3), "{}", stderr_of(&out));
    };
    run("a", "1");
    run("b", "4");

    for file in ["tallies.csv", "singles.csv"] {
        let left = fs::read(tmp.path().join("a").join(file)).unwrap();
        let right = fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(left, right, "{file} differs between worker counts");
    }
    for file in ["summary.json", "fair_sampling.json"] {
        assert_eq!(
            json_modulo_timestamp(&tmp.path().join("a").join(file)),
            json_modulo_timestamp(&tmp.path().join("b").join(file)),
            "{file} differs between worker counts"
        );
    }
}

#[test]
fn out_dir_env_var_supplies_the_default() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_e91sim"))
        .args(["run", "genuine", "--rounds", "2000", "--seed", "1"])
        .current_dir(tmp.path())
        .env("E91SIM_OUT_DIR", "from_env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", stderr_of(&out));
    assert!(tmp.path().join("from_env/summary.json").exists());

    // An explicit flag wins over the environment.
    let out = Command::new(env!("CARGO_BIN_EXE_e91sim"))
        .args(["run", "genuine", "--rounds", "2000", "--seed", "1", "--out-dir", "flagged"])
        .current_dir(tmp.path())
        .env("E91SIM_OUT_DIR", "ignored_env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", stderr_of(&out));
    assert!(tmp.path().join("flagged/summary.json").exists());
    assert!(!tmp.path().join("ignored_env").exists());
}

#[test]
fn compare_writes_the_grid_with_exact_zero_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = e91sim(
        tmp.path(),
        &[
            "compare",
            "ideal",
            "--grid-points",
            "3",
            "--samples",
            "5000",
            "--seed",
            "5",
            "--out-dir",
            "reports",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("max |z|"));

    let text = fs::read_to_string(tmp.path().join("reports/comparison.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# scenario=compare-ideal "));
    assert_eq!(lines[1], "rel_angle,mc,stderr,analytic,z");
    assert_eq!(lines.len(), 5);
    // Grid point 2 of 3 sits at π/4, where the transmitted arm tops out
    // exactly at the threshold: both columns must be exactly zero.
    let mid: Vec<&str> = lines[3].split(',').collect();
    assert_eq!(mid[1], "0", "mc at the boundary point: {}", lines[3]);
    assert_eq!(mid[3], "0", "analytic at the boundary point: {}", lines[3]);
    assert_eq!(mid[4], "0", "z at the boundary point: {}", lines[3]);
}

#[test]
fn compare_with_an_empty_grid_exits_0() {
    let tmp = tempfile::tempdir().unwrap();
    let out = e91sim(
        tmp.path(),
        &["compare", "linear", "--grid-points", "0", "--out-dir", "reports"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let text = fs::read_to_string(tmp.path().join("reports/comparison.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "comment and header only:\n{text}");
}
