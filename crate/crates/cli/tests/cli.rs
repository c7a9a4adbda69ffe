use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;
use tempfile::TempDir;

use deconv::MinimaxReport;

fn deconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deconv"))
        .args(args)
        .env_remove("DECONV_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = deconv(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Numeric CSV as header plus rows.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).expect("csv exists");
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Samples from the flat prior on the cyclic domain [-8, 8) plus N(0, 1)
/// noise, wrapped.
fn flat_samples(dir: &Path, n: usize) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut text = String::from("x\n");
    for _ in 0..n {
        let mu: f64 = rng.random_range(-8.0..8.0);
        let z: f64 = rng.sample(StandardNormal);
        let x = (mu + z + 8.0).rem_euclid(16.0) - 8.0;
        text.push_str(&format!("{x}\n"));
    }
    let path = dir.join("samples.csv");
    fs::write(&path, text).unwrap();
    path
}

fn crime_csv(dir: &Path) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut text = String::from("community,population,burglaries,larcenies,auto_theft,arsons\n");
    for i in 0..300 {
        let population: u64 = rng.random_range(25_000..150_000);
        let rate: f64 = rng.random_range(0.0..0.06);
        let c = (population as f64 * rate) as u64;
        text.push_str(&format!("town {i},{population},{},{},{},{}\n", c / 4, c / 2, c / 8, c - c / 4 - c / 2 - c / 8));
    }
    text.push_str("unknown,40000,?,3,2,1\n");
    let path = dir.join("crime.csv");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn fit_recovers_flat_prior_and_density_integrates_to_one() {
    let tmp = TempDir::new().unwrap();
    let samples = flat_samples(tmp.path(), 20_000);
    let out = tmp.path().join("fit");
    ok(&["fit", "--samples", s(&samples), "--m-half", "8", "--p", "4", "--out", s(&out)]);

    let report = read_json(&out.join("fit_report.json"));
    assert_eq!(report["converged"], true);
    let eta: Vec<f64> = serde_json::from_value(report["eta"].clone()).unwrap();
    let norm = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm < 0.05, "eta = {eta:?}");

    let (header, rows) = read_csv(&out.join("density.csv"));
    assert_eq!(header, ["mu", "g_hat"]);
    let h = rows[1][0] - rows[0][0];
    let mass: f64 = rows.iter().map(|r| r[1]).sum::<f64>() * h;
    assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
}

#[test]
fn fit_rejects_empty_basis() {
    let tmp = TempDir::new().unwrap();
    let samples = flat_samples(tmp.path(), 100);
    let out = deconv(&["fit", "--samples", s(&samples), "--p", "0", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unparsable_sample_reports_line() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.csv");
    fs::write(&path, "x\n0.5\n1.5\nnot-a-number\n").unwrap();
    let out = deconv(&["fit", "--samples", s(&path), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 4"), "{stderr}");
}

#[test]
fn gaussian_spectrum_halves() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("eff");
    ok(&["efficiency", "--carrier", "gaussian", "--out", s(&out)]);
    let (header, rows) = read_csv(&out.join("spectrum.csv"));
    assert_eq!(header, ["j", "lambda"]);
    for (j, row) in rows.iter().take(5).enumerate() {
        assert_eq!(row[0], j as f64);
        let want = 0.5f64.powi(j as i32);
        assert!((row[1] - want).abs() < 1e-3, "lambda_{j} = {}", row[1]);
    }
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1] + 1e-12));
}

#[test]
fn two_towers_first_statistic_is_linear() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("tt");
    ok(&[
        "efficiency", "--mode", "favorable", "--carrier", "two-towers", "--variant", "1",
        "--p", "2", "--floor", "1e-10", "--out", s(&out),
    ]);
    let (header, rows) = read_csv(&out.join("favorable.csv"));
    assert_eq!(header, ["mu", "T1", "T2"]);
    // g0 is constant on its support 1 <= |mu| <= 2.
    let on: Vec<&Vec<f64>> = rows.iter().filter(|r| (1.0..=2.0).contains(&r[0].abs())).collect();
    let dot: f64 = on.iter().map(|r| r[0] * r[1]).sum();
    let tt: f64 = on.iter().map(|r| r[1] * r[1]).sum();
    let mm: f64 = on.iter().map(|r| r[0] * r[0]).sum();
    let cosine = dot.abs() / (tt * mm).sqrt();
    assert!(cosine >= 0.95, "cosine {cosine}");
}

#[test]
fn degenerate_carrier_without_floor_is_numerical_error() {
    let tmp = TempDir::new().unwrap();
    let out = deconv(&[
        "efficiency", "--mode", "favorable", "--carrier", "two-towers", "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--floor"));
}

#[test]
fn minimax_standard_case() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("mm");
    ok(&["minimax", "--sigma", "1", "--kappa", "2", "--c", "100", "--out", s(&out)]);
    let text = fs::read_to_string(out.join("minimax.json")).unwrap();
    let report: MinimaxReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.p_star, 4);
    assert!((report.beta - 3.0).abs() < 1e-12);
    assert!(report.alpha > 1.0 && report.alpha < 2.0);
    assert!(report.ratio_bound >= 1.0);
}

#[test]
fn minimax_rejects_small_kappa() {
    let tmp = TempDir::new().unwrap();
    let out = deconv(&["minimax", "--sigma", "1", "--kappa", "0.5", "--c", "10", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn simulate_writes_one_row_per_replicate() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("sim.json");
    fs::write(
        &config,
        r#"{"carrier": {"kind": "gene_mixture"}, "n": 500, "replicates": 10, "seed": 3,
            "estimator": {"method": "efron", "p": 5}, "grid": {"m_half": 12, "n_points": 256}}"#,
    )
    .unwrap();
    let out = tmp.path().join("sim");
    ok(&["simulate", "--config", s(&config), "--out", s(&out)]);
    let text = fs::read_to_string(out.join("replicates.csv")).unwrap();
    assert_eq!(text.lines().count(), 11);
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["replicates"], 10);
}

#[test]
fn simulate_config_error_has_line() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("sim.json");
    fs::write(&config, "{\"carrier\": {\"kind\": \"bump\"},\n\"n\": \"many\"}\n").unwrap();
    let out = deconv(&["simulate", "--config", s(&config), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn crime_curve_includes_threshold_row() {
    let tmp = TempDir::new().unwrap();
    let data = crime_csv(tmp.path());
    let out = tmp.path().join("crime");
    let run = ok(&["crime", "--data", s(&data), "--b", "500", "--seed", "1", "--out", s(&out)]);
    assert!(String::from_utf8_lossy(&run.stdout).contains("p_hat = 0.0200"));

    let (header, rows) = read_csv(&out.join("posterior.csv"));
    assert_eq!(header, ["p_hat", "prob_safe"]);
    let row = rows
        .iter()
        .find(|r| (r[0] - 0.02).abs() < 1e-12)
        .expect("row at p_hat = 0.02");
    assert!((0.0..=1.0).contains(&row[1]));

    let report = read_json(&out.join("crime_report.json"));
    assert_eq!(report["communities"], 300);
    assert_eq!(report["load"]["missing"], 1);
}

#[test]
fn fetch_failure_is_external_error() {
    let tmp = TempDir::new().unwrap();
    // A regular file where the cache directory should be: creating it fails
    // before any network access.
    let blocker = tmp.path().join("not-a-dir");
    fs::write(&blocker, "").unwrap();
    let cache = blocker.join("cache");
    let out = deconv(&["crime", "--fetch", "--cache-dir", s(&cache), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--data"));
}

#[test]
fn fetch_without_cache_dir_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = deconv(&["crime", "--fetch", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
}

fn assert_same_outputs(a: &Path, b: &Path) {
    let manifest = read_json(&a.join("manifest.json"));
    let outputs = manifest["outputs"].as_object().unwrap();
    assert!(!outputs.is_empty());
    for name in outputs.keys() {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }
    assert_eq!(manifest["outputs"], read_json(&b.join("manifest.json"))["outputs"]);
}

#[test]
fn replay_reproduces_outputs_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    let data = crime_csv(tmp.path());
    let first = tmp.path().join("first");
    ok(&["crime", "--data", s(&data), "--seed", "4", "--out", s(&first)]);
    let second = tmp.path().join("second");
    ok(&["replay", "--manifest", s(&first.join("manifest.json")), "--out", s(&second)]);
    assert_same_outputs(&first, &second);

    let samples = flat_samples(tmp.path(), 2_000);
    let fit = tmp.path().join("fit");
    ok(&["fit", "--samples", s(&samples), "--m-half", "8", "--out", s(&fit)]);
    let refit = tmp.path().join("refit");
    ok(&["replay", "--manifest", s(&fit.join("manifest.json")), "--out", s(&refit)]);
    assert_same_outputs(&fit, &refit);
}

#[test]
fn replay_refuses_changed_input() {
    let tmp = TempDir::new().unwrap();
    let samples = flat_samples(tmp.path(), 500);
    let fit = tmp.path().join("fit");
    ok(&["fit", "--samples", s(&samples), "--m-half", "8", "--out", s(&fit)]);
    fs::write(&samples, "x\n0.0\n1.0\n").unwrap();
    let out = deconv(&["replay", "--manifest", s(&fit.join("manifest.json")), "--out", s(&tmp.path().join("r"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn every_output_directory_has_one_manifest() {
    let tmp = TempDir::new().unwrap();
    let runs: [&[&str]; 3] = [
        &["minimax", "--sigma", "1", "--kappa", "2", "--c", "50"],
        &["efficiency", "--carrier", "gaussian", "--n-points", "256"],
        &["efficiency", "--mode", "rho", "--carrier", "gaussian", "--n-points", "256"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", s(&dir)]);
        ok(&full);
        let manifests: Vec<_> = fs::read_dir(&dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("manifest"))
            .collect();
        assert_eq!(manifests.len(), 1, "{args:?}");
        let manifest = read_json(&dir.join("manifest.json"));
        for (name, digest) in manifest["outputs"].as_object().unwrap() {
            let bytes = fs::read(dir.join(name)).unwrap();
            let expected = sha256(&bytes);
            assert_eq!(digest.as_str().unwrap(), expected, "{name}");
        }
    }
}

fn sha256(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    format!("{:x}", Sha256::digest(bytes))
}

#[test]
fn hermite_table_matches_closed_forms() {
    let out = ok(&["hermite", "--degree", "2", "--x=-1.5,0,2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,H0,H1,H2"));
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        let x = v[0];
        assert_eq!(v[1], 1.0);
        assert!((v[2] + x).abs() < 1e-14);
        assert!((v[3] - (x * x - 1.0) / 2f64.sqrt()).abs() < 1e-14);
    }
}
