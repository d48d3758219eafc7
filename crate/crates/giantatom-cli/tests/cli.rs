//! End-to-end checks of the command-line front-end: outputs, exit codes,
//! determinism, and resume behavior.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_giantatom"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("giantatom-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_cfg(dir: &std::path::Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn data_lines(path: &std::path::Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[test]
fn rates_hits_df_zeros() {
    let dir = tmp_dir("rates");
    let status = bin()
        .args(["rates", "--out", dir.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let lines = data_lines(&dir.join("rates.csv"));
    assert_eq!(lines.len(), 1602); // header + 1601 samples
    // sample at ω = ω0/8 (index 200 of 1601 over [0, ω0]) is a DF zero
    let row: Vec<f64> = lines[201]
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((row[0] - 0.125).abs() < 1e-12);
    assert!(row[1].abs() < 1e-7, "Γ_ind(ω0/8) = {}", row[1]);
    // manifest written
    assert!(dir.join("run_manifest.json").exists());
}

#[test]
fn df_outputs_six_roots() {
    let dir = tmp_dir("df");
    let status = bin()
        .args(["df", "--out", dir.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("df.json")).unwrap()).unwrap();
    assert_eq!(doc["count"], 6);
}

#[test]
fn config_errors_exit_2() {
    let dir = tmp_dir("cfg-err");
    let cfg = write_cfg(&dir, r#"{"rates": {"samples": 0}, "output_dir": "OUT"}"#);
    let status = bin()
        .args([
            "rates",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // malformed JSON also exits 2
    let bad = write_cfg(&dir, "{nonsense");
    let status = bin()
        .args(["df", "--config", bad.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn capacity_errors_exit_4() {
    let dir = tmp_dir("cap");
    let cfg = write_cfg(
        &dir,
        r#"{"xxz": {"n_sites": 6, "t_list": [0.1], "l": 2}}"#,
    );
    let status = bin()
        .args([
            "xxz",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn xxz_single_time_single_row_and_deterministic() {
    let dir = tmp_dir("xxz");
    let cfg = write_cfg(
        &dir,
        r#"{"xxz": {"n_sites": 2, "j_mhz": 1.0, "t_list": [0.4], "l": 3,
                   "hardware": {"rz_virtual_only": true}}}"#,
    );
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let status = bin()
            .args([
                "xxz",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = data_lines(&out_a.join("xxz.csv"));
    let b = data_lines(&out_b.join("xxz.csv"));
    assert_eq!(a.len(), 2); // header + one row
    assert_eq!(a, b, "identical config must give identical data rows");
}

#[test]
fn resume_skips_completed_points() {
    let dir = tmp_dir("resume");
    let cfg = write_cfg(
        &dir,
        r#"{"xxz": {"n_sites": 2, "j_mhz": 1.0, "t_list": [0.2, 0.4], "l": 2,
                   "hardware": {"rz_virtual_only": true}}}"#,
    );
    let out = dir.join("out");
    let run = |resume: bool| {
        let mut args = vec![
            "xxz".to_string(),
            "--config".into(),
            cfg.to_str().unwrap().into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ];
        if resume {
            args.push("--resume".into());
        }
        assert!(bin().args(&args).status().unwrap().success());
        data_lines(&out.join("xxz.csv"))
    };
    let first = run(false);
    let second = run(true);
    assert_eq!(first, second);
}

#[test]
fn markov_check_reports_both_conventions() {
    let dir = tmp_dir("markov");
    let output = bin()
        .args(["markov-check", "--out", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(output.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("markov.json")).unwrap()).unwrap();
    let angular = doc["ratio_gamma_angular"].as_f64().unwrap();
    let ordinary = doc["ratio_gamma_ordinary"].as_f64().unwrap();
    assert!((angular - 12.566).abs() < 0.05);
    assert!((ordinary - 2.0).abs() < 1e-9);
}

#[test]
fn resume_ignores_stale_outputs_from_other_configs() {
    let dir = tmp_dir("resume-stale");
    let out = dir.join("out");
    let cfg_a = write_cfg(
        &dir,
        r#"{"xxz": {"n_sites": 2, "j_mhz": 1.0, "t_list": [0.4], "l": 2,
                   "hardware": {"rz_virtual_only": true}}}"#,
    );
    assert!(bin()
        .args(["xxz", "--config", cfg_a.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap()
        .success());
    let first = data_lines(&out.join("xxz.csv"));
    // different physics, same t key: resume must not reuse the stale row
    let cfg_b = dir.join("config_b.json");
    std::fs::write(
        &cfg_b,
        r#"{"xxz": {"n_sites": 2, "j_mhz": 2.0, "t_list": [0.4], "l": 2,
                   "hardware": {"rz_virtual_only": true}}}"#,
    )
    .unwrap();
    assert!(bin()
        .args([
            "xxz",
            "--config",
            cfg_b.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--resume",
        ])
        .status()
        .unwrap()
        .success());
    let second = data_lines(&out.join("xxz.csv"));
    assert_ne!(first[1], second[1], "stale row must be recomputed");
}
