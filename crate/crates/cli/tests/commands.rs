use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ltgreen::config::ExperimentConfig;
use sha2::{Digest, Sha256};

const SMALL: &str = "\
seed = 7

[lt]
k = 200
trials = 100
p_points = 6
snr_db_max = 40.0
snr_db_step = 5.0
";

fn ltgreen(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltgreen"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Header and records of a CSV file; code names contain commas, so fields may be quoted.
fn table(path: impl AsRef<Path>) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn energy_row_for_uncoded_binary_link() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ltgreen(tmp.path(), &["energy", "--m", "2", "--d", "40"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(tmp.path().join("energy.csv"));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scheme,M,Rc,gain_dB,d_m,radiated_J,tx_circuit_J,rx_circuit_J,transient_J,decoder_J,total_J"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "uncoded");
    assert_eq!(row[1], "2");
    assert_eq!(row[10], "4.40243e1");
    assert!(lines.next().is_none());
}

#[test]
fn named_code_threshold_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ltgreen(tmp.path(), &["threshold", "--pair", "uncoded,trel(7,[133 171])", "--m", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = table(tmp.path().join("thresholds.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "uncoded/trel(7,[133 171])");
    let d: f64 = rows[0][1].parse().unwrap();
    assert!((d - 5.913216025163059).abs() < 2e-3, "{d}");
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn sidecar_and_config_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ltgreen(tmp.path(), &["--seed", "99", "energy", "--d", "10"]);
    assert!(o.status.success());
    let echo = read(tmp.path().join("config.toml"));
    let cfg = ExperimentConfig::from_toml(&echo).unwrap();
    assert_eq!(cfg.seed, 99);
    let mut expected = ExperimentConfig::default();
    expected.seed = 99;
    assert_eq!(cfg, expected);
    let meta = read(tmp.path().join("energy.meta.toml"));
    let hex: String = Sha256::digest(echo.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    assert!(meta.contains("seed = 99"), "{meta}");
    assert!(meta.contains(&hex), "{meta}");
    assert!(meta.contains("build = \"ltgreen-cli "), "{meta}");
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "[channel]\neta = 1.5\n").unwrap();
    let o = ltgreen(tmp.path(), &["--config", path.to_str().unwrap(), "energy", "--d", "1"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("channel.eta"));
}

#[test]
fn unknown_command_prints_usage() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ltgreen(tmp.path(), &["frobnicate"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_scheme_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ltgreen(tmp.path(), &["energy", "--scheme", "turbo", "--d", "1"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown scheme"));
}

#[test]
fn lt_outputs_are_deterministic_and_shaped() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        for args in [
            vec!["--config", &cfg, "rate-pmf", "--m", "2,8", "--snr-db", "26,6,16"],
            vec!["--config", &cfg, "lt-gain", "--m", "2"],
        ] {
            let o = ltgreen(out, &args);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
    }
    for name in ["rate_pmf.csv", "lt_gain.csv", "rate_profile.csv", "config.toml", "rate-pmf.meta.toml"] {
        assert_eq!(read(a.join(name)), read(b.join(name)), "{name}");
    }

    let pmf = read(a.join("rate_pmf.csv"));
    let mut lines = pmf.lines();
    assert_eq!(lines.next().unwrap(), "m,avg_snr_db,rate,mass");
    let rows: Vec<(u32, f64, f64, f64)> = lines
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].parse().unwrap(), c[1].parse().unwrap(), c[2].parse().unwrap(), c[3].parse().unwrap())
        })
        .collect();
    // 19 rates (18 grid rates and failure) x 3 SNRs x 2 constellations
    assert_eq!(rows.len(), 19 * 3 * 2);
    for block in rows.chunks(3) {
        assert!(block.iter().all(|r| r.0 == block[0].0 && r.2 == block[0].2));
        assert_eq!([block[0].1, block[1].1, block[2].1], [6.0, 16.0, 26.0]);
    }
    for m_rows in rows.chunks(19 * 3) {
        assert!(m_rows.windows(2).all(|w| w[1].2 <= w[0].2));
        for snr in [6.0, 16.0, 26.0] {
            let sum: f64 = m_rows.iter().filter(|r| r.1 == snr).map(|r| r.3).sum();
            assert!((sum - 1.0).abs() < 1e-4, "{sum}");
        }
    }

    let gain = read(a.join("lt_gain.csv"));
    let mut lines = gain.lines();
    assert_eq!(lines.next().unwrap(), "m,avg_snr_db,avg_rate,gain_db");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        // binary gain is the required-SNR gap: 10 log10(998) - SNR
        assert!((r[3] - (29.99131 - r[1])).abs() < 1e-4, "{r:?}");
    }
}

#[test]
fn cached_profile_is_reused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("o");
    assert!(ltgreen(&out, &["--config", &cfg, "lt-gain", "--m", "2"]).status.success());
    let first = read(out.join("rate_profile.csv"));
    assert!(first.starts_with("# decoder="), "{}", &first[..40.min(first.len())]);
    let o = Command::new(env!("CARGO_BIN_EXE_ltgreen"))
        .args(["--out", out.to_str().unwrap(), "--config", &cfg, "lt-gain", "--m", "2"])
        .env("RUST_LOG", "info")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("reusing rate profile"));
    // a different seed changes the key and forces a rebuild
    let o = Command::new(env!("CARGO_BIN_EXE_ltgreen"))
        .args(["--out", out.to_str().unwrap(), "--config", &cfg, "--seed", "8", "lt-gain", "--m", "2"])
        .env("RUST_LOG", "info")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("building rate profile"));
}

#[test]
fn sweep_columns_and_monotone_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let o = ltgreen(tmp.path(), &["--config", &cfg, "sweep"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = table(tmp.path().join("sweep.csv"));
    assert_eq!(header.len(), 1 + 3 * 4);
    assert_eq!(&header[..4], ["d_m", "uncoded_best_M", "uncoded_best_code", "uncoded_energy_J"]);
    assert_eq!(header[10], "lt_best_M");
    assert_eq!(rows.len(), 60);
    assert!(rows.iter().all(|r| r.len() == header.len()));
    for col in [3usize, 6, 9, 12] {
        let e: Vec<f64> = rows.iter().map(|r| r[col].parse().unwrap()).collect();
        assert!(e.windows(2).all(|w| w[1] >= w[0]), "column {}", header[col]);
    }
    let meta = read(tmp.path().join("sweep.meta.toml"));
    assert!(meta.contains("\"scheme.conv\" = \"trel(6,[53 75]);"), "{meta}");
}

#[test]
fn missing_crossover_is_reported_per_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ltgreen(
        tmp.path(),
        &["threshold", "--pair", "uncoded,uncoded", "--pair", "uncoded,BCH(31,26,1)", "--m", "2"],
    );
    assert!(!o.status.success());
    let csv = read(tmp.path().join("thresholds.csv"));
    assert_eq!(csv.lines().nth(1), Some("uncoded/uncoded,"));
    let (_, rows) = table(tmp.path().join("thresholds.csv"));
    assert_eq!(rows[1][0], "uncoded/BCH(31,26,1)");
    let d: f64 = rows[1][1].parse().unwrap();
    assert!((d - 4.5766).abs() < 1e-3, "{d}");
    assert!(stdout(&o).contains("no crossover"));
}
