use isbft_cli::config::OUT_DIR_ENV;
use std::path::Path;
use std::process::{Command, Output};

fn isbft(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isbft")).args(args).arg("--out-dir").arg(out).output().expect("spawn isbft")
}

/// Data rows of a metadata-prefixed CSV.
fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| isbft(args, dir.path()).status.code();
    assert_eq!(code(&["derive", "--case", "I"]), Some(0));
    assert_eq!(code(&["validate", "--case", "II"]), Some(0));
    // The published Case IV configuration itself breaks one row.
    assert_eq!(code(&["validate", "--case", "IV"]), Some(1));
    assert_eq!(code(&["derive", "--case", "I", "--rho", "0.5"]), Some(1));
    assert_eq!(code(&["derive", "--case", "V"]), Some(2));
    assert_eq!(code(&["reduced", "--case", "I", "--runs", "0"]), Some(2));
    assert_eq!(code(&["simulate", "--case", "I", "--seeds", "0"]), Some(2));
    assert_eq!(code(&["simulate", "--case", "I", "--bogus"]), Some(2));
}

#[test]
fn derive_writes_full_precision_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = isbft(&["derive", "--case", "I"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("tau0       2.469858"), "{text}");
    let r = rows(&dir.path().join("derive.csv"));
    let tau0 = r.iter().find(|r| &r[0] == "tau0").unwrap()[1].parse::<f64>().unwrap();
    assert!((tau0 - 2.469858).abs() < 1e-6 && tau0 != 2.469858);
}

#[test]
fn tiny_horizon_censors_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = isbft(&["simulate", "--case", "IV", "--seeds", "5", "--horizon", "0.001"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = rows(&dir.path().join("metrics.csv"));
    assert_eq!(r.len(), 5);
    assert!(r.iter().all(|row| &row[5] == "true" && row[4].is_empty()));
}

#[test]
fn seed_count_gives_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--case", "IV", "--seeds", "12", "--adversary", "two-faced", "--horizon", "0.05"];
    assert_eq!(isbft(&args, dir.path()).status.code(), Some(0));
    let r = rows(&dir.path().join("metrics.csv"));
    assert_eq!(r.len(), 12);
    assert!(r.iter().all(|row| &row[3] == "two-faced" && &row[2] == "IV"));
    let seeds: Vec<&str> = r.iter().map(|row| row.get(1).unwrap()).collect();
    assert_eq!(seeds[..3], ["0", "1", "2"]);
}

#[test]
fn config_file_and_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "case = \"III\"\nruns = 300\nseed = 11\nbins = 7\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_isbft"))
        .args(["reduced", "--config"])
        .arg(&cfg)
        .args(["--runs", "200"])
        .env(OUT_DIR_ENV, dir.path().join("env-out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let base = dir.path().join("env-out");
    assert_eq!(rows(&base.join("reduced.csv")).len(), 200);
    let hist = std::fs::read_to_string(base.join("histogram.json")).unwrap();
    let json: String = hist.lines().filter(|l| !l.starts_with('#')).collect();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["counts"].as_array().unwrap().len(), 7);
    assert_eq!(v["n"], 200);
    assert!(hist.contains("# seed: 11"));
}

#[test]
fn sweep_covers_the_cartesian_product() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--cases", "III,IV", "--adversaries", "silent,random", "--seeds", "2", "--horizon", "0.02"];
    assert_eq!(isbft(&args, dir.path()).status.code(), Some(0));
    let r = rows(&dir.path().join("sweep.csv"));
    assert_eq!(r.len(), 8);
    assert_eq!(&r[0][2], "III");
    assert_eq!(&r[7][2], "IV");
    assert_eq!(&r[7][3], "random");
}

#[test]
fn trace_export_is_time_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--case", "IV", "--seed", "3", "--horizon", "0.03", "--trace", "--init", "synchronized"];
    assert_eq!(isbft(&args, dir.path()).status.code(), Some(0));
    let r = rows(&dir.path().join("trace.csv"));
    assert!(r.iter().any(|row| &row[4] == "sample"));
    assert!(r.iter().any(|row| &row[4] == "basic-sync"));
    let t: Vec<f64> = r.iter().map(|row| row[1].parse().unwrap()).collect();
    assert!(t.windows(2).all(|w| w[0] <= w[1]));
}
