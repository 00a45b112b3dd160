use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use freqbin_lab::config::SCHEMA_HEADER;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("freqbin-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqbin-lab")).args(args).output().unwrap()
}

fn run_in(out: &Path, args: &[&str]) -> Output {
    let o = Command::new(env!("CARGO_BIN_EXE_freqbin-lab")).args(args).arg("--out").arg(out).output().unwrap();
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

/// Data rows of a CSV table, split on commas, after the schema and column lines.
fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(SCHEMA_HEADER));
    let cols = lines.next().unwrap().split(',').map(String::from).collect();
    (cols, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn column(cols: &[String], name: &str) -> usize {
    cols.iter().position(|c| c == name).unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["herald", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(run(&["herald", "--theta", "pie"]).status.code(), Some(2));
    let o = run(&["herald", "--set", "nonsense_key=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
}

#[test]
fn noisy_runs_require_a_seed() {
    let o = run(&["moments", "--shots", "1000", "--out", scratch("noseed").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
}

#[test]
fn invalid_angles_are_flagged_verbatim() {
    let o = run(&["herald", "--theta", "4", "--out", scratch("angle").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid-parameter"));
}

#[test]
fn herald_table_rows() {
    let dir = scratch("herald");
    run_in(&dir, &["herald"]);
    let (cols, rows) = table(&dir.join("loss_sweep.csv"));
    assert_eq!(rows.len(), 21);
    let (p, flag, fh) = (column(&cols, "p"), column(&cols, "p_flag"), column(&cols, "F_heralded"));
    let num = |s: &str| s.parse::<f64>().unwrap();
    assert_eq!(num(&rows[0][p]), 0.0);
    assert!((num(&rows[0][column(&cols, "F_unheralded")]) - 1.0).abs() < 1e-12);
    for r in &rows[..20] {
        assert!((num(&r[fh]) - 1.0).abs() < 1e-9);
        assert!((num(&r[flag]) - num(&r[p])).abs() < 1e-9);
    }
    assert_eq!(rows[20][fh], "nan");
    let (_, remote) = table(&dir.join("remote_entanglement.csv"));
    assert_eq!(remote.len(), 21);
}

#[test]
fn zero_amplitude_spectroscopy_is_flat() {
    let dir = scratch("flat");
    run_in(&dir, &["spectroscopy", "--amps", "0", "--start", "0.6", "--stop", "0.8", "--points", "5", "--ideal"]);
    let (cols, rows) = table(&dir.join("spectroscopy_param.csv"));
    let pop = column(&cols, "population");
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!((r[pop].parse::<f64>().unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn moments_round_trip_through_files() {
    let dir = scratch("moments");
    run_in(&dir, &["moments", "--shots", "0", "--theta", "pi/3"]);
    let ideal = dir.join("moments_theta1.0472_ideal.csv");
    let again = scratch("moments-again");
    run_in(&again, &["moments", "--shots", "0", "--input", ideal.to_str().unwrap()]);
    let a = std::fs::read_to_string(dir.join("moments_theta1.0472_denoised.csv")).unwrap();
    let b = std::fs::read_to_string(again.join("moments_input_denoised.csv")).unwrap();
    assert!(a.starts_with(SCHEMA_HEADER));
    assert_eq!(a, b);
}

#[test]
fn config_file_and_json_output() {
    let dir = scratch("config");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, "experiment = \"demo\"\nformat = \"json\"\ntheta = [\"pi/2\"]\nloss = [0.0, 0.5]\n").unwrap();
    run_in(&dir, &["herald", "--config", cfg.to_str().unwrap()]);
    let text = std::fs::read_to_string(dir.join("demo_loss_sweep.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["schema"].as_str().unwrap().contains("schema=1"));
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    // command-line flags override the file
    run_in(&dir, &["herald", "--config", cfg.to_str().unwrap(), "--format", "csv", "--loss", "0.1"]);
    let (_, rows) = table(&dir.join("demo_loss_sweep.csv"));
    assert_eq!(rows.len(), 1);
}

#[test]
fn encoded_zero_emits_nothing_into_s() {
    let dir = scratch("emit");
    run_in(&dir, &["emit", "--ideal", "--theta", "0"]);
    let (cols, rows) = table(&dir.join("emit_summary.csv"));
    let (mode, photons) = (column(&cols, "mode"), column(&cols, "photons"));
    let s = rows.iter().find(|r| r[mode] == "S").unwrap();
    assert!(s[photons].parse::<f64>().unwrap() < 1e-3);
    assert!(dir.join("envelopes_eta1.1000_theta0.0000.csv").exists());
}

#[test]
fn ideal_process_tomography() {
    let dir = scratch("qpt");
    let o = run_in(&dir, &["tomography", "--kind", "process", "--ideal", "--shots", "0"]);
    let chi: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("chi.json")).unwrap()).unwrap();
    assert!(chi["process_fidelity"].as_f64().unwrap() >= 0.999);
    let (cols, rows) = table(&dir.join("tomography_process.csv"));
    let plus_x = rows.iter().find(|r| r[0] == "plus_x").unwrap();
    assert!(plus_x[column(&cols, "F")].parse::<f64>().unwrap() >= 0.99);
    assert!(String::from_utf8_lossy(&o.stdout).contains("process fidelity"));
}
