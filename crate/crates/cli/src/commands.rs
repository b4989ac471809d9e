//! One function per subcommand. Each returns the JSON `result` block and
//! whether the command succeeded; numerical work is delegated to the
//! library unchanged.

use crate::args::{
    bounds_for, BenchArgs, EstimateArgs, FisherArgs, LoglikArgs, Mode, Search, SimulateArgs, ValidateArgs,
};
use crate::field_file::FieldFile;
use anyhow::{bail, Context, Result};
use gridfield::cache::InverseCache;
use gridfield::estimation::{
    build_sieve, default_nu, estimate_phi, expected_phi_power_ratio, kl_diagnostics, replicate_phi_power,
    replicate_sieve, sieve_mle_with, EstimationResult, SearchMode, Sieve,
};
use gridfield::likelihood::{
    fisher_asymptotic, fisher_trace_exact, loglik_parts, loglik_parts_cached, FISHER_EXACT_MAX_N,
};
use gridfield::oracle::{dense_mvn_logdensity, DENSE_MAX_SIZE};
use gridfield::sampling::{sample_field, SeededStream};
use gridfield::validation::{self, ValidateConfig};
use gridfield::{GridSpec, ModelParams};
use serde_json::{json, Value};
use std::time::Instant;

pub struct Outcome {
    pub result: Value,
    pub success: bool,
}

impl From<Value> for Outcome {
    fn from(result: Value) -> Self {
        Outcome { result, success: true }
    }
}

fn params_json(p: &ModelParams) -> Value {
    json!({ "phi": p.phi, "theta": p.thetas })
}

/// Returns the field file text; the caller writes it.
pub fn simulate(a: &SimulateArgs) -> Result<String> {
    let params = a.model.resolve(a.d, None)?;
    let grid = GridSpec::new(a.n, params.d())?;
    let field = sample_field(&params, grid, SeededStream::new(a.seed, a.stream))?;
    Ok(FieldFile {
        params,
        seed: Some((a.seed, a.stream)),
        field,
    }
    .to_text())
}

pub fn loglik(a: &LoglikArgs) -> Result<Outcome> {
    let file = FieldFile::read(&a.field)?;
    let d = file.field.grid.d;
    let params = a
        .model
        .resolve(Some(d), Some((file.params.phi, file.params.thetas.clone())))?;
    let parts = loglik_parts(&file.field, &params)?;
    Ok(json!({
        "n": file.field.grid.n,
        "d": d,
        "params": params_json(&params),
        "loglik": parts.loglik,
        "log_det_sigma": parts.log_det_sigma,
        "quad_form": parts.quad_form,
    })
    .into())
}

fn search_mode(s: Search) -> SearchMode {
    match s {
        Search::Exhaustive => SearchMode::Exhaustive,
        Search::CoarseToFine => SearchMode::CoarseToFine,
    }
}

fn sieve_json(s: &Sieve) -> Value {
    json!({
        "nu": s.nu,
        "mesh": s.mesh(),
        "points": s.len(),
        "points_per_coordinate": s.axes.iter().map(Vec::len).collect::<Vec<_>>(),
        "bounds": s.bounds,
        "consistent_regime": s.consistent_regime,
    })
}

fn estimation_json(r: &EstimationResult) -> Value {
    json!({
        "phi_hat": r.phi_hat,
        "theta_hats": r.theta_hats,
        "loglik_at_max": r.loglik_at_max,
        "evaluations": r.evaluations,
        "ties": r.ties,
    })
}

fn theta_tilde(a: &EstimateArgs, d: usize) -> Result<Vec<f64>> {
    match a.theta_tilde.len() {
        0 => bail!("phi-only mode needs --theta-tilde"),
        1 => Ok(vec![a.theta_tilde[0]; d]),
        k if k == d => Ok(a.theta_tilde.clone()),
        k => bail!("{k} --theta-tilde values for {d} axes"),
    }
}

fn sieve_for(a: &EstimateArgs, d: usize, n: usize) -> Result<Sieve> {
    if a.bounds.is_empty() {
        bail!("sieve mode needs --bounds for φ (t=0) and each θ_t");
    }
    let bounds = bounds_for(&a.bounds, d)?;
    Ok(build_sieve(&bounds, n, a.nu.unwrap_or_else(|| default_nu(d)))?)
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    let m = x.iter().sum::<f64>() / k;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    (m, v.sqrt())
}

fn median(mut x: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    let k = x.len();
    if k % 2 == 1 {
        x[k / 2]
    } else {
        0.5 * (x[k / 2 - 1] + x[k / 2])
    }
}

pub fn estimate(a: &EstimateArgs) -> Result<Outcome> {
    match &a.field {
        Some(path) => {
            if a.reps.is_some() {
                bail!("--reps applies only when no field file is given");
            }
            let file = FieldFile::read(path)?;
            let (n, d) = (file.field.grid.n, file.field.grid.d);
            match a.mode {
                Mode::PhiOnly => {
                    let tt = theta_tilde(a, d)?;
                    let phi_hat = estimate_phi(&file.field, &tt)?;
                    Ok(json!({ "mode": "phi-only", "n": n, "d": d, "theta_tilde": tt, "phi_hat": phi_hat }).into())
                }
                Mode::Sieve => {
                    let sieve = sieve_for(a, d, n)?;
                    let t0 = Instant::now();
                    let r = sieve_mle_with(&file.field, &sieve, search_mode(a.search), InverseCache::global())?;
                    Ok(json!({
                        "mode": "sieve",
                        "n": n,
                        "d": d,
                        "search": a.search,
                        "estimate": estimation_json(&r),
                        "sieve": sieve_json(&sieve),
                        "seconds": t0.elapsed().as_secs_f64(),
                    })
                    .into())
                }
            }
        }
        None => monte_carlo(a),
    }
}

fn monte_carlo(a: &EstimateArgs) -> Result<Outcome> {
    let n = a.n.context("without a field file, --n is required")?;
    let reps = a.reps.context("without a field file, --reps is required")?;
    if reps < 2 {
        bail!("--reps must be at least 2");
    }
    let truth = a.model.resolve(a.d, None)?;
    let d = truth.d();
    let t0 = Instant::now();
    match a.mode {
        Mode::PhiOnly => {
            let tt = theta_tilde(a, d)?;
            let x = replicate_phi_power(&truth, n, &tt, reps, a.seed)?;
            let (mean, sd) = mean_sd(&x);
            let se = sd / (reps as f64).sqrt();
            let expected = truth.phi.powi(d as i32) * expected_phi_power_ratio(&truth.thetas, &tt, n)?;
            Ok(json!({
                "mode": "phi-only",
                "n": n,
                "d": d,
                "reps": reps,
                "truth": params_json(&truth),
                "theta_tilde": tt,
                "phi_power_mean": mean,
                "phi_power_sd": sd,
                "phi_power_se": se,
                "phi_power_expected": expected,
                "z": (mean - expected) / se,
                "seconds": t0.elapsed().as_secs_f64(),
            })
            .into())
        }
        Mode::Sieve => {
            if a.search != Search::Exhaustive {
                bail!("Monte Carlo runs use the exhaustive search");
            }
            let sieve = sieve_for(a, d, n)?;
            let rs = replicate_sieve(&truth, n, &sieve, reps, a.seed)?;
            let nearest = sieve.nearest(
                &std::iter::once(truth.phi)
                    .chain(truth.thetas.iter().copied())
                    .collect::<Vec<_>>(),
            );
            let at_nearest = rs
                .iter()
                .filter(|r| r.phi_hat == nearest[0] && r.theta_hats == nearest[1..])
                .count();
            let median_abs_error: Vec<f64> =
                std::iter::once(median(rs.iter().map(|r| (r.phi_hat - truth.phi).abs()).collect()))
                    .chain(
                        (0..d).map(|t| median(rs.iter().map(|r| (r.theta_hats[t] - truth.thetas[t]).abs()).collect())),
                    )
                    .collect();
            let kl = rs
                .iter()
                .map(|r| kl_diagnostics(&truth, &ModelParams::new(r.phi_hat, r.theta_hats.clone())?))
                .collect::<gridfield::Result<Vec<_>>>()?;
            Ok(json!({
                "mode": "sieve",
                "n": n,
                "d": d,
                "reps": reps,
                "truth": params_json(&truth),
                "sieve": sieve_json(&sieve),
                "nearest_sieve_point": nearest,
                "fraction_at_nearest": at_nearest as f64 / reps as f64,
                "median_abs_error": median_abs_error,
                "mean_kl_f": kl.iter().map(|k| k.0).sum::<f64>() / reps as f64,
                "mean_kl_g": kl.iter().map(|k| k.1).sum::<f64>() / reps as f64,
                "mean_ties": rs.iter().map(|r| r.ties as f64).sum::<f64>() / reps as f64,
                "seconds": t0.elapsed().as_secs_f64(),
            })
            .into())
        }
    }
}

pub fn fisher(a: &FisherArgs) -> Result<Outcome> {
    let params = a.model.resolve(a.d, None)?;
    let asym = fisher_asymptotic(&params, a.n)?;
    let exact = if a.n <= FISHER_EXACT_MAX_N {
        Value::from(fisher_trace_exact(&params, a.n)?.rows())
    } else {
        Value::Null
    };
    Ok(json!({
        "n": a.n,
        "d": params.d(),
        "params": params_json(&params),
        "order": std::iter::once("phi".to_string()).chain((1..=params.d()).map(|t| format!("theta_{t}"))).collect::<Vec<_>>(),
        "asymptotic": asym.rows(),
        "exact_traces": exact,
    })
    .into())
}

pub fn validate(a: &ValidateArgs) -> Result<Outcome> {
    let mut cfg = ValidateConfig {
        max_n: a.n,
        sweep_n: a.sweep_n,
        inject_sign_flip: a.inject_sign_flip,
        ..ValidateConfig::default()
    };
    for o in &a.tol_override {
        cfg.set_tolerance(&o.key, o.value)?;
    }
    let t0 = Instant::now();
    let report = validation::run(&cfg)?;
    for s in &report.suites {
        eprintln!(
            "{:<22} {}  worst {:.2e}  tol {:.1e}  {}",
            s.name,
            if s.passed { "PASS" } else { "FAIL" },
            s.worst,
            s.tolerance,
            s.detail
        );
    }
    Ok(Outcome {
        success: report.passed,
        result: json!({
            "passed": report.passed,
            "tolerances": cfg.tolerances,
            "suites": report.suites,
            "seconds": t0.elapsed().as_secs_f64(),
        }),
    })
}

fn timing_json(secs: &[f64]) -> Value {
    let mut s = secs.to_vec();
    s.sort_by(f64::total_cmp);
    json!({ "median": median(s.clone()), "min": s[0], "max": s[s.len() - 1], "runs": s.len() })
}

pub fn bench(a: &BenchArgs) -> Result<Outcome> {
    if a.reps == 0 {
        bail!("--reps must be positive");
    }
    let mut model = a.model.clone();
    if model.thetas.is_empty() {
        model.thetas = vec![1.0];
    }
    let params = model.resolve(Some(a.d), None)?;
    let grid = GridSpec::new(a.n, a.d)?;
    let field = sample_field(&params, grid, SeededStream::new(a.seed, 0))?;
    let mut structured = Vec::new();
    let mut value = 0.0;
    for _ in 0..a.reps {
        // A fresh cache each time, so the per-axis inverses are part of the cost.
        let cache = InverseCache::new(a.d);
        let t0 = Instant::now();
        value = loglik_parts_cached(&field, &params, &cache)?.loglik;
        structured.push(t0.elapsed().as_secs_f64());
    }
    let structured_median = median(structured.clone());
    let dense = if grid.size() <= DENSE_MAX_SIZE {
        let mut secs = Vec::new();
        let mut dv = 0.0;
        for _ in 0..a.reps {
            let t0 = Instant::now();
            dv = dense_mvn_logdensity(&field, &params)?;
            secs.push(t0.elapsed().as_secs_f64());
        }
        let dense_median = median(secs.clone());
        json!({
            "feasible": true,
            "seconds": timing_json(&secs),
            "loglik": dv,
            "speedup": dense_median / structured_median,
            "abs_difference": (dv - value).abs(),
        })
    } else {
        json!({
            "feasible": false,
            "reason": format!("{} sites exceed the dense limit of {DENSE_MAX_SIZE}", grid.size()),
        })
    };
    Ok(json!({
        "n": a.n,
        "d": a.d,
        "sites": grid.size(),
        "params": params_json(&params),
        "threads": rayon::current_num_threads(),
        "structured": { "seconds": timing_json(&structured), "loglik": value },
        "dense": dense,
    })
    .into())
}
