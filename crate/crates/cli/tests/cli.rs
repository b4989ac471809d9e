use gridfield::estimation::estimate_phi;
use gridfield::likelihood::{loglik, loglik_parts};
use gridfield::oracle::dense_mvn_logdensity;
use gridfield::{GridSpec, LatticeField, ModelParams};
use gridfield_cli::field_file::FieldFile;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gridfield"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn gridfield")
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &TempDir, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.path().join(name);
    let mut args = vec!["simulate", "--out", p(&path)];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn write_field(dir: &TempDir, name: &str, f: &FieldFile) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, f.to_text()).unwrap();
    path
}

const D2N4: [&str; 9] = ["--n", "4", "--phi", "1.3", "--theta", "0.8", "--theta", "2.5", "--seed"];

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let mut a = D2N4.to_vec();
    a.push("7");
    let x = simulate(&dir, "a.txt", &a);
    let y = simulate(&dir, "b.txt", &a);
    let (tx, ty) = (std::fs::read(&x).unwrap(), std::fs::read(&y).unwrap());
    assert_eq!(tx, ty);
    let f = FieldFile::read(&x).unwrap();
    assert_eq!(f.field.values.len(), 16);
    assert_eq!(f.seed, Some((7, 0)));
    assert_eq!(f.params.thetas, vec![0.8, 2.5]);
    a[9] = "8";
    let z = simulate(&dir, "c.txt", &a);
    assert_ne!(std::fs::read(&z).unwrap(), tx);
    // Only the target remains: no temporary files are left behind.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 3);
}

#[test]
fn simulate_to_stdout_matches_file() {
    let dir = TempDir::new().unwrap();
    let path = simulate(&dir, "a.txt", &["--n", "3", "--theta", "1", "--seed", "2"]);
    let out = run(&["simulate", "--n", "3", "--theta", "1", "--seed", "2"]);
    assert_eq!(out.stdout, std::fs::read(path).unwrap());
}

#[test]
fn invalid_theta_fails_with_diagnostic() {
    for bad in ["0", "-1", "nan"] {
        let out = run(&["simulate", "--n", "4", "--theta", bad]);
        assert!(!out.status.success(), "θ={bad}");
        assert!(!out.stderr.is_empty());
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn loglik_pipeline_matches_dense_oracle() {
    let dir = TempDir::new().unwrap();
    let mut a = D2N4.to_vec();
    a.push("7");
    let path = simulate(&dir, "f.txt", &a);
    let r = ok_json(&["loglik", p(&path)]);
    let f = FieldFile::read(&path).unwrap();
    let got = r["result"]["loglik"].as_f64().unwrap();
    let dense = dense_mvn_logdensity(&f.field, &f.params).unwrap();
    assert!((got - dense).abs() <= 1e-8 * dense.abs(), "{got} vs {dense}");
    // Thin wrapper: the same bits as the library call.
    let lib = loglik_parts(&f.field, &f.params).unwrap();
    assert_eq!(got, lib.loglik);
    assert_eq!(r["result"]["quad_form"].as_f64().unwrap(), lib.quad_form);
    assert_eq!(r["result"]["log_det_sigma"].as_f64().unwrap(), lib.log_det_sigma);
    assert_eq!(r["result"]["params"]["phi"].as_f64().unwrap(), 1.3);
    // Explicit parameters override the header.
    let r = ok_json(&["loglik", p(&path), "--phi", "2", "--theta", "1"]);
    let q = ModelParams::new(2.0, vec![1.0, 1.0]).unwrap();
    assert_eq!(r["result"]["loglik"].as_f64().unwrap(), loglik(&f.field, &q).unwrap());
}

#[test]
fn zero_field() {
    let dir = TempDir::new().unwrap();
    let params = ModelParams::new(1.0, vec![1.0, 2.0]).unwrap();
    let grid = GridSpec::new(5, 2).unwrap();
    let f = FieldFile {
        params: params.clone(),
        seed: None,
        field: LatticeField::zeros(grid),
    };
    let path = write_field(&dir, "zero.txt", &f);
    let r = ok_json(&["loglik", p(&path)]);
    let res = &r["result"];
    assert_eq!(res["quad_form"].as_f64().unwrap(), 0.0);
    let logdet = res["log_det_sigma"].as_f64().unwrap();
    let expected = -0.5 * logdet - 0.5 * 25.0 * (2.0 * std::f64::consts::PI).ln();
    assert!((res["loglik"].as_f64().unwrap() - expected).abs() < 1e-12 * expected.abs());
    // The φ estimate of a zero field is zero.
    let r = ok_json(&["estimate", p(&path), "--theta-tilde", "1"]);
    assert_eq!(r["result"]["phi_hat"].as_f64().unwrap(), 0.0);
}

#[test]
fn permuted_input_file_gives_same_loglik() {
    let dir = TempDir::new().unwrap();
    let path = simulate(
        &dir,
        "f.txt",
        &[
            "--n", "4", "--theta", "0.7", "--theta", "1.3", "--theta", "2.1", "--phi", "0.9", "--seed", "3",
        ],
    );
    let f = FieldFile::read(&path).unwrap();
    let perm = [2, 0, 1];
    let g = FieldFile {
        params: ModelParams::new(f.params.phi, perm.iter().map(|&t| f.params.thetas[t]).collect()).unwrap(),
        seed: f.seed,
        field: f.field.permute_axes(&perm).unwrap(),
    };
    assert_ne!(g.field.values, f.field.values);
    let permuted = write_field(&dir, "g.txt", &g);
    let a = ok_json(&["loglik", p(&path)])["result"]["loglik"].as_f64().unwrap();
    let b = ok_json(&["loglik", p(&permuted)])["result"]["loglik"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-10 * a.abs(), "{a} vs {b}");
}

#[test]
fn phi_only_matches_library_bitwise() {
    let dir = TempDir::new().unwrap();
    let path = simulate(
        &dir,
        "f.txt",
        &["--n", "8", "--theta", "1.5", "--theta", "0.6", "--seed", "11"],
    );
    let r = ok_json(&[
        "estimate",
        p(&path),
        "--mode",
        "phi-only",
        "--theta-tilde",
        "1.2",
        "--theta-tilde",
        "0.9",
    ]);
    let f = FieldFile::read(&path).unwrap();
    let lib = estimate_phi(&f.field, &[1.2, 0.9]).unwrap();
    assert_eq!(r["result"]["phi_hat"].as_f64().unwrap().to_bits(), lib.to_bits());
    assert_eq!(r["config"]["estimate"]["mode"], "phi-only");
}

#[test]
fn singleton_sieve() {
    let dir = TempDir::new().unwrap();
    let path = simulate(&dir, "f.txt", &["--n", "16", "--theta", "1", "--seed", "1"]);
    // ν = 1/4 at n = 16 gives mesh 1/2, so each bound admits one point.
    let r = ok_json(&[
        "estimate",
        p(&path),
        "--mode",
        "sieve",
        "--nu",
        "0.25",
        "--bounds",
        "0:1:1",
        "--bounds",
        "1:1.5:1.5",
    ]);
    let res = &r["result"];
    assert_eq!(res["estimate"]["phi_hat"].as_f64().unwrap(), 1.0);
    assert_eq!(res["estimate"]["theta_hats"][0].as_f64().unwrap(), 1.5);
    assert_eq!(res["estimate"]["evaluations"].as_u64().unwrap(), 1);
    assert_eq!(res["sieve"]["points"].as_u64().unwrap(), 1);
    assert_eq!(res["sieve"]["consistent_regime"], false);
}

#[test]
fn empty_sieve_and_missing_bounds_fail() {
    let dir = TempDir::new().unwrap();
    let path = simulate(&dir, "f.txt", &["--n", "16", "--theta", "1"]);
    let out = run(&[
        "estimate",
        p(&path),
        "--mode",
        "sieve",
        "--nu",
        "0.25",
        "--bounds",
        "0:1.1:1.2",
        "--bounds",
        "1:1:2",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sieve"));
    let out = run(&["estimate", p(&path), "--mode", "sieve", "--bounds", "0:1:2"]);
    assert!(!out.status.success());
    let out = run(&["estimate", p(&path), "--mode", "phi-only"]);
    assert!(!out.status.success());
}

#[test]
fn malformed_field_file_fails() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "# gridfield field\nversion = 1\n---\n1\n").unwrap();
    let out = run(&["loglik", p(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));
    let out = run(&["loglik", p(&dir.path().join("absent.txt"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn monte_carlo_phi_only() {
    let r = ok_json(&[
        "estimate",
        "--mode",
        "phi-only",
        "--n",
        "8",
        "--d",
        "2",
        "--theta",
        "1",
        "--theta-tilde",
        "1",
        "--reps",
        "200",
        "--seed",
        "5",
    ]);
    let res = &r["result"];
    let z = res["z"].as_f64().unwrap();
    assert!(z.abs() < 4.0, "z = {z}");
    assert_eq!(res["reps"].as_u64().unwrap(), 200);
    // Same seed, same numbers.
    let again = ok_json(&[
        "estimate",
        "--mode",
        "phi-only",
        "--n",
        "8",
        "--d",
        "2",
        "--theta",
        "1",
        "--theta-tilde",
        "1",
        "--reps",
        "200",
        "--seed",
        "5",
    ]);
    assert_eq!(again["result"]["phi_power_mean"], res["phi_power_mean"]);
}

#[test]
fn fisher_report() {
    let r = ok_json(&["fisher", "--n", "20", "--phi", "1.3", "--theta", "0.8"]);
    let exact = &r["result"]["exact_traces"];
    let phiphi = exact[0][0].as_f64().unwrap();
    assert!((phiphi - 20.0 / (2.0 * 1.3 * 1.3)).abs() < 1e-12 * phiphi);
    assert_eq!(r["result"]["order"][1], "theta_1");
    let big = ok_json(&["fisher", "--n", "1000", "--theta", "1"]);
    assert!(big["result"]["exact_traces"].is_null());
}

#[test]
fn validate_passes_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("v.json");
    let out = run(&["validate", "--out", p(&out_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(r["result"]["passed"], true);
    let suites = r["result"]["suites"].as_array().unwrap();
    assert!(suites.len() >= 10);
    for s in suites {
        assert_eq!(s["passed"], true, "{s}");
        assert!(!s["covers"].as_str().unwrap().is_empty());
    }
}

#[test]
fn validate_catches_sign_flip() {
    let out = run(&["validate", "--n", "16", "--sweep-n", "8", "--inject-sign-flip", "4,5"]);
    assert_eq!(out.status.code(), Some(2));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["result"]["passed"], false);
    let cof = r["result"]["suites"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["name"] == "cofactors")
        .unwrap();
    assert_eq!(cof["passed"], false);
}

#[test]
fn validate_tolerance_overrides() {
    let out = run(&[
        "validate",
        "--n",
        "16",
        "--sweep-n",
        "6",
        "--tol-override",
        "det_rel=1e-30",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["result"]["tolerances"]["det_rel"].as_f64().unwrap(), 1e-30);
    let out = run(&["validate", "--tol-override", "nonsense=1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_reports_timings_and_feasibility() {
    let r = ok_json(&["bench", "--n", "12", "--d", "2", "--reps", "2"]);
    let res = &r["result"];
    assert_eq!(res["dense"]["feasible"], true);
    assert!(res["dense"]["speedup"].as_f64().unwrap() > 1.0);
    assert!(res["dense"]["abs_difference"].as_f64().unwrap() < 1e-6 * res["dense"]["loglik"].as_f64().unwrap().abs());
    assert_eq!(res["structured"]["seconds"]["runs"].as_u64().unwrap(), 2);
    let r = ok_json(&["bench", "--n", "64", "--d", "3", "--reps", "1"]);
    assert_eq!(r["result"]["dense"]["feasible"], false);
    assert!(r["result"]["structured"]["loglik"].as_f64().unwrap().is_finite());
}

#[test]
fn thread_cap_from_environment() {
    let out = bin()
        .args(["bench", "--n", "8", "--d", "2", "--reps", "1"])
        .env("GRIDFIELD_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["result"]["threads"].as_u64().unwrap(), 2);
    let out = bin()
        .args(["fisher", "--n", "8", "--theta", "1"])
        .env("GRIDFIELD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
