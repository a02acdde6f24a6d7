use purimode_core::csvio::Table;
use std::path::Path;
use std::process::{Command, Output};

fn purimode(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_purimode")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SHORT: &str = "[bath]\nx_d_over_lambda0 = 4.0\n[simulation]\nt_max = 5.0\nn_points = 51\n";

#[test]
fn build_audits_sixteen_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT);
    let out = purimode(&["build", "--config", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("modes: 16"));
    let audit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/mode_counts.json")).unwrap()).unwrap();
    assert_eq!(audit["modes"], 16);
}

#[test]
fn outputs_are_byte_identical_and_tagged() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT);
    for dir in ["a", "b"] {
        let out = purimode(&["simulate", "--config", &cfg, "--out", dir], tmp.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(tmp.path().join("a/trajectory.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/trajectory.csv")).unwrap();
    assert_eq!(a, b);
    let table = Table::parse(&String::from_utf8(a).unwrap()).unwrap();
    assert_eq!(table.meta_value("config_hash").map(str::len), Some(64));
    assert_eq!(table.meta_value("time_unit"), Some("ps"));
    assert_eq!(table.rows.len(), 51);
    // 17 significant digits.
    let line = std::fs::read_to_string(tmp.path().join("a/trajectory.csv")).unwrap();
    let row = line.lines().find(|l| !l.starts_with('#') && !l.starts_with('t')).unwrap();
    for cell in row.split(',') {
        let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.replace('.', "").len(), 17, "{cell}");
    }
}

#[test]
fn unknown_keys_fail_with_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[simulation]\nt_max = 5.0\nengine_kind = \"dense\"\n");
    let out = purimode(&["simulate", "--config", &cfg, "--out", "o"], tmp.path());
    assert!(!out.status.success());
    let report: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(report["error"]["kind"], "config");
    assert!(report["error"]["message"].as_str().unwrap().contains("engine_kind"));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn thread_cap_must_be_positive() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT);
    let out = Command::new(env!("CARGO_BIN_EXE_purimode"))
        .args(["build", "--config", &cfg, "--out", "o"])
        .env("PURIMODE_THREADS", "zero")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let ok = Command::new(env!("CARGO_BIN_EXE_purimode"))
        .args(["build", "--config", &cfg, "--out", "o"])
        .env("PURIMODE_THREADS", "1")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(ok.status.success());
}

#[test]
fn figure3_b_tracks_the_lindblad_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let out = purimode(&["figure3", "b", "--xd", "4", "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ours = Table::read(tmp.path().join("o/figure3-b/populations.csv")).unwrap();
    let reference = Table::read(tmp.path().join("o/figure3-b/lindblad_reference.csv")).unwrap();
    for col in ["P_e1_re", "P_e2_re", "n_c1_re", "n_c2_re"] {
        let (a, b) = (ours.column(col).unwrap(), reference.column(col).unwrap());
        let dev = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(dev <= 0.02, "{col}: {dev}");
    }
    // The exchange actually happens inside the window.
    assert!(ours.column("P_e2_re").unwrap().iter().cloned().fold(0.0, f64::max) > 0.2);
}

#[test]
fn validate_writes_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = purimode(&["validate", "--only", "1,2", "--out", "v"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS criterion")).count(), 2);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("v/validation.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["criteria"].as_array().unwrap().len(), 2);
}

#[test]
fn fit_from_sampled_correlations() {
    let tmp = tempfile::tempdir().unwrap();
    // One damped envelope per cavity; the cross entries vanish.
    let mut csv = String::from("t,re,im\n");
    for k in 0..400 {
        let t = k as f64 * 0.02;
        let z = purimode_core::Complex64::new(-0.9 * t, 0.3 * t).exp();
        csv.push_str(&format!("{t},{},{}\n", z.re, z.im));
    }
    std::fs::write(tmp.path().join("c11.csv"), &csv).unwrap();
    std::fs::write(tmp.path().join("c22.csv"), &csv).unwrap();
    let cfg = write_config(
        tmp.path(),
        "[decomposition]\nmethod = \"fit\"\nn_terms = 1\nfit_tolerance = 1e-8\n\
         [[bath.samples]]\na = \"c1\"\nb = \"c1d\"\npath = \"c11.csv\"\n\
         [[bath.samples]]\na = \"c2\"\nb = \"c2d\"\npath = \"c22.csv\"\n",
    );
    let out = purimode(&["fit", "--config", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let terms = purimode_core::corrlib::terms_from_table(&Table::read(tmp.path().join("o/terms_c1_c1d.csv")).unwrap()).unwrap();
    assert_eq!(terms.len(), 1);
    assert!((terms[0].gamma - 0.9).abs() < 1e-8);
    let out = purimode(&["build", "--config", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
