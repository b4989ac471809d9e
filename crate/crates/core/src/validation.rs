//! Oracle-equivalence suites: every structured path checked against an
//! independent dense or extended-precision reference. Tolerances default to
//! the documented values and can be overridden by key.

use crate::asymptotics::{
    inverse_entry_approx, logdet_approx, trace_derivatives, trace_derivatives_exact, trace_rinv_r, trace_rinv_r_exact,
    trace_rinv_r_squared_bound, ApproxForm,
};
use crate::error::{GridError, Result};
use crate::kernel::{corr_matrix, GridSpec, ModelParams, ScalarContext};
use crate::likelihood::{fisher_trace_exact, loglik, quad_form, LatticeField};
use crate::oracle::{
    corr_inverse_wide, corr_minor_det_wide, dense_covariance, dense_logdet, dense_mvn_logdensity, dense_solve,
    DenseMatrix,
};
use crate::sampling::axis_cholesky;
use crate::signed_log::SignedLog;
use crate::structured_linalg::{
    canonicalize, cofactor_closed, cofactor_recurrence, inverse_entry, inverse_matrix, logdet_closed,
    logdet_recurrence, AxisScalars, Precision, TauFamily, TauKind,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Decay rates swept by the exactness suites.
pub const SWEEP_THETAS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];

/// `(key, default, meaning)` for every overridable tolerance.
pub const TOLERANCES: &[(&str, f64, &str)] = &[
    ("det_rel", 1e-9, "log-determinant, relative to max(1, |log det|)"),
    ("cofactor_rel", 1e-8, "minor, relative"),
    ("inverse_entry_rel", 1e-7, "inverse entry, relative, entries above 1e-6"),
    ("inverse_residual", 1e-7, "max |R⁻¹R − I|"),
    ("approx_logdet_rel", 1e-10, "leading determinant form at θ=1, n=30"),
    ("approx_inverse_rel", 1e-9, "approximate inverse entries at θ=1, n=30"),
    ("trace_ratio_lo", 3.0, "lower bound on error(n)/error(2n)"),
    ("trace_ratio_hi", 5.0, "upper bound on error(n)/error(2n)"),
    (
        "squared_trace_variation",
        0.2,
        "relative spread of the squared trace over n ∈ {16, 32, 64}",
    ),
    ("loglik_abs", 1e-8, "log-likelihood vs dense density, absolute (d=1)"),
    (
        "loglik_rel",
        1e-8,
        "log-likelihood and quadratic form vs dense, relative (d=2)",
    ),
    ("fisher_rel", 0.15, "(θ,θ) information vs 7n² at d=3, n=32"),
    ("precision_rel", 1e-9, "wide vs plain-double τ and roots at w = 1e-2"),
    ("cholesky_residual", 1e-10, "max |LLᵀ − R| at n=64"),
];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidateConfig {
    /// Largest `n` for the determinant and residual sweeps.
    pub max_n: usize,
    /// Largest `n` for the all-cells minor and inverse-entry sweeps.
    pub sweep_n: usize,
    pub tolerances: BTreeMap<String, f64>,
    /// Negates the closed-form minor at this canonical cell, to confirm the
    /// suites catch a sign error.
    pub inject_sign_flip: Option<(usize, usize)>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            max_n: 64,
            sweep_n: 16,
            tolerances: TOLERANCES.iter().map(|&(k, v, _)| (k.to_string(), v)).collect(),
            inject_sign_flip: None,
        }
    }
}

impl ValidateConfig {
    pub fn set_tolerance(&mut self, key: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(GridError::Domain(format!("tolerance {key}={value} must be positive")));
        }
        match self.tolerances.get_mut(key) {
            Some(v) => {
                *v = value;
                Ok(())
            }
            None => Err(GridError::Domain(format!(
                "unknown tolerance key {key:?}; known keys: {}",
                TOLERANCES.iter().map(|t| t.0).collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    fn tol(&self, key: &str) -> f64 {
        self.tolerances[key]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    /// The result this suite exercises.
    pub covers: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / b.abs()
}

fn rel_log(a: SignedLog, b: SignedLog) -> f64 {
    if a.sign != b.sign {
        return f64::INFINITY;
    }
    (a.log_mag - b.log_mag).exp_m1().abs()
}

/// Tracks the worst value and where it occurred.
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: 0.0,
            at: String::new(),
        }
    }
    fn see(&mut self, v: f64, at: impl FnOnce() -> String) {
        // NaN counts as a failure, so it must win the comparison.
        if v.is_nan() || v > self.value || self.at.is_empty() {
            self.value = if v.is_nan() { f64::INFINITY } else { v };
            self.at = at();
        }
    }
}

fn suite(name: &str, covers: &str, worst: Worst, tolerance: f64) -> SuiteReport {
    SuiteReport {
        name: name.into(),
        covers: covers.into(),
        passed: worst.value <= tolerance,
        worst: worst.value,
        tolerance,
        detail: worst.at,
    }
}

fn determinant(cfg: &ValidateConfig) -> Result<SuiteReport> {
    let mut w = Worst::new();
    for &th in &SWEEP_THETAS {
        for n in 2..=cfg.max_n {
            let c = ScalarContext::new(th, n)?;
            let closed = logdet_closed(&c)?;
            let rec = logdet_recurrence(&c, n)?;
            let dense = dense_logdet(&DenseMatrix(corr_matrix(&c).0))?;
            let scale = dense.log_mag.abs().max(1.0);
            let bad_sign = closed.sign != dense.sign || rec.sign != dense.sign;
            let err = if bad_sign {
                f64::INFINITY
            } else {
                (closed.log_mag - dense.log_mag)
                    .abs()
                    .max((rec.log_mag - dense.log_mag).abs())
                    / scale
            };
            w.see(err, || format!("θ={th} n={n}"));
        }
    }
    Ok(suite(
        "determinant",
        "closed-form and recurrence log-determinants vs dense LU",
        w,
        cfg.tol("det_rel"),
    ))
}

fn cofactors(cfg: &ValidateConfig) -> Result<SuiteReport> {
    let mut w = Worst::new();
    for &th in &SWEEP_THETAS {
        for n in 2..=cfg.sweep_n {
            let c = ScalarContext::new(th, n)?;
            for i in 1..=n {
                for j in 1..=n {
                    let mut closed = cofactor_closed(&c, i, j)?;
                    if cfg.inject_sign_flip == Some(canonicalize(n, i, j)?) {
                        closed = -closed;
                    }
                    let rec = cofactor_recurrence(&c, i, j)?;
                    let dense = corr_minor_det_wide(&c, i, j)?;
                    let err = rel_log(closed, dense).max(rel_log(rec, dense));
                    w.see(err, || format!("θ={th} n={n} ({i},{j})"));
                }
            }
        }
    }
    Ok(suite(
        "cofactors",
        "closed-form minors (every cell, signs included) and the Hessenberg recurrence vs extended-precision dense minors",
        w,
        cfg.tol("cofactor_rel"),
    ))
}

fn inverse_entries(cfg: &ValidateConfig) -> Result<SuiteReport> {
    let mut w = Worst::new();
    for &th in &SWEEP_THETAS {
        for n in 5..=cfg.sweep_n.max(5) {
            let c = ScalarContext::new(th, n)?;
            let inv = if let Some((fi, fj)) = cfg.inject_sign_flip {
                // Rebuild with the flipped minor so the mutation reaches the inverse.
                DMatrix::from_fn(n, n, |r, s| {
                    let v = inverse_entry(&c, r + 1, s + 1).unwrap_or(f64::NAN);
                    match canonicalize(n, r + 1, s + 1) {
                        Ok(cell) if cell == (fi, fj) => -v,
                        _ => v,
                    }
                })
            } else {
                inverse_matrix(&c)?
            };
            let wide = corr_inverse_wide(&c)?;
            for r in 0..n {
                for s in 0..n {
                    let b = wide[(r, s)];
                    if b.abs() > 1e-6 {
                        w.see(rel(inv[(r, s)], b), || format!("θ={th} n={n} ({},{})", r + 1, s + 1));
                    }
                }
            }
        }
    }
    Ok(suite(
        "inverse-entries",
        "closed-form inverse entries vs extended-precision dense inversion",
        w,
        cfg.tol("inverse_entry_rel"),
    ))
}

fn inverse_residual(cfg: &ValidateConfig) -> Result<SuiteReport> {
    let mut w = Worst::new();
    for &th in &SWEEP_THETAS {
        for n in 2..=cfg.max_n {
            let c = ScalarContext::new(th, n)?;
            let res = (inverse_matrix(&c)? * corr_matrix(&c).0 - DMatrix::<f64>::identity(n, n)).amax();
            w.see(res, || format!("θ={th} n={n}"));
        }
    }
    Ok(suite(
        "inverse-residual",
        "max |R⁻¹R − I| of the closed-form inverse",
        w,
        cfg.tol("inverse_residual"),
    ))
}

fn asymptotic(cfg: &ValidateConfig) -> Result<Vec<SuiteReport>> {
    let n = 30;
    let c = ScalarContext::new(1.0, n)?;
    let mut det = Worst::new();
    let a = logdet_approx(&c, ApproxForm::Leading)?;
    let e = logdet_closed(&c)?;
    det.see(rel_log(a, e), || format!("θ=1 n={n}"));
    let mut inv = Worst::new();
    for i in 1..=n {
        for j in 1..=n {
            let v = rel(inverse_entry_approx(&c, i, j)?, inverse_entry(&c, i, j)?);
            inv.see(v, || format!("θ=1 n={n} ({i},{j})"));
        }
    }
    Ok(vec![
        suite(
            "approx-determinant",
            "dominant-root determinant form vs the exact determinant",
            det,
            cfg.tol("approx_logdet_rel"),
        ),
        suite(
            "approx-inverse",
            "boundary and interior inverse approximations vs exact entries",
            inv,
            cfg.tol("approx_inverse_rel"),
        ),
    ])
}

fn traces(cfg: &ValidateConfig) -> Result<Vec<SuiteReport>> {
    let set = [0.5, 1.0, 2.0];
    let (lo, hi) = (cfg.tol("trace_ratio_lo"), cfg.tol("trace_ratio_hi"));
    // Distance of the ratio outside [lo, hi]; zero when inside.
    let mut out = Worst::new();
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut see = |r: f64, at: String| {
        let d = if r < lo {
            lo - r
        } else if r > hi {
            r - hi
        } else {
            0.0
        };
        range = (range.0.min(r), range.1.max(r));
        out.see(d, || format!("{at}: ratio {r:.3}"));
    };
    for &th in &set {
        for &tt in &set {
            if th == tt {
                continue;
            }
            let err = |n| -> Result<f64> { Ok((trace_rinv_r(th, tt, n) - trace_rinv_r_exact(th, tt, n)?).abs()) };
            let (e16, e32, e64) = (err(16)?, err(32)?, err(64)?);
            see(e16 / e32, format!("tr(R_θ⁻¹R_θ̃) θ={th} θ̃={tt} n=16"));
            see(e32 / e64, format!("tr(R_θ⁻¹R_θ̃) θ={th} θ̃={tt} n=32"));
        }
        let derr = |n| -> Result<(f64, f64)> {
            let (a, b) = trace_derivatives(th, n);
            let (x, y) = trace_derivatives_exact(th, n)?;
            Ok(((a - x).abs(), (b - y).abs()))
        };
        let (d16, d32, d64) = (derr(16)?, derr(32)?, derr(64)?);
        see(d16.0 / d32.0, format!("first-derivative trace θ={th} n=16"));
        see(d32.0 / d64.0, format!("first-derivative trace θ={th} n=32"));
        see(d16.1 / d32.1, format!("second-derivative trace θ={th} n=16"));
        see(d32.1 / d64.1, format!("second-derivative trace θ={th} n=32"));
    }
    if out.value == 0.0 {
        out.at = format!("all ratios in [{:.3}, {:.3}]", range.0, range.1);
    }
    let mut sq = Worst::new();
    let v: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| trace_rinv_r_squared_bound(1.0, 2.0, n))
        .collect::<Result<_>>()?;
    let (a, b) = v.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    sq.see((b - a) / a, || format!("θ=1 θ̃=2 values {v:.3?}"));
    Ok(vec![
        suite(
            "trace-expansions",
            "second-order decay of the trace expansion errors (0 means every ratio lies in the band)",
            out,
            0.0,
        ),
        suite(
            "squared-trace",
            "boundedness of (1/n) tr[(R_θ⁻¹R_θ̃)²] in n",
            sq,
            cfg.tol("squared_trace_variation"),
        ),
    ])
}

fn test_field(n: usize, d: usize, seed: f64) -> Result<LatticeField> {
    let g = GridSpec::new(n, d)?;
    let v = (0..g.size()).map(|k| ((k as f64 + 1.0) * seed).sin() * 1.7).collect();
    LatticeField::new(g, v)
}

fn likelihood(cfg: &ValidateConfig) -> Result<Vec<SuiteReport>> {
    let mut abs1 = Worst::new();
    let p = ModelParams::new(1.0, vec![1.0])?;
    let f = test_field(6, 1, 0.3)?;
    abs1.see((loglik(&f, &p)? - dense_mvn_logdensity(&f, &p)?).abs(), || {
        "d=1 n=6".into()
    });
    let mut rel2 = Worst::new();
    let p = ModelParams::new(0.7, vec![1.5, 0.4])?;
    let f = test_field(4, 2, 0.9)?;
    rel2.see(rel(loglik(&f, &p)?, dense_mvn_logdensity(&f, &p)?), || {
        "log-likelihood d=2 n=4".into()
    });
    let sigma = dense_covariance(&p, 4)?;
    let prefactor = crate::kernel::variance_prefactor(&p)?;
    let x = dense_solve(&DenseMatrix(sigma), &f.values)?;
    let q_dense: f64 = x.iter().zip(&f.values).map(|(a, b)| a * b).sum::<f64>() * prefactor;
    rel2.see(rel(quad_form(&f, &p)?, q_dense), || "quadratic form d=2 n=4".into());
    Ok(vec![
        suite(
            "loglik-d1",
            "Kronecker log-likelihood vs dense Gaussian density",
            abs1,
            cfg.tol("loglik_abs"),
        ),
        suite(
            "loglik-d2",
            "Kronecker log-likelihood and quadratic form vs dense Kronecker expansion",
            rel2,
            cfg.tol("loglik_rel"),
        ),
    ])
}

fn fisher(cfg: &ValidateConfig) -> Result<SuiteReport> {
    let mut w = Worst::new();
    let f1 = fisher_trace_exact(&ModelParams::new(1.3, vec![0.8])?, 20)?;
    w.see(rel(f1.get(0, 0), 20.0 / (2.0 * 1.3 * 1.3)), || {
        "d=1 (φ,φ) vs n/(2φ²)".into()
    });
    let f3 = fisher_trace_exact(&ModelParams::new(1.0, vec![1.0; 3])?, 32)?;
    w.see(rel(f3.get(1, 1), 7.0 * 32.0 * 32.0), || "d=3 n=32 (θ,θ) vs 7n²".into());
    Ok(suite(
        "fisher",
        "exact-trace information vs its leading-order form",
        w,
        cfg.tol("fisher_rel"),
    ))
}

fn precision(cfg: &ValidateConfig) -> Result<SuiteReport> {
    let mut w = Worst::new();
    for &th in &SWEEP_THETAS {
        let n = (th / 1e-2).round() as usize;
        let c = ScalarContext::new(th, n)?;
        let lo = TauFamily::with_precision(&c, Precision::Double);
        let hi = TauFamily::with_precision(&c, Precision::DoubleDouble);
        for kind in [TauKind::Tau, TauKind::TauStar, TauKind::TauHat, TauKind::TauTilde] {
            for k in -2..=6 {
                w.see(rel(lo.eval(k, kind), hi.eval(k, kind)), || {
                    format!("θ={th} {kind:?}({k})")
                });
            }
        }
        let a = AxisScalars::with_precision(&c, Precision::Double)?.roots;
        let b = AxisScalars::with_precision(&c, Precision::DoubleDouble)?.roots;
        for (x, y, name) in [
            (a.a, b.a, "a"),
            (a.b, b.b, "b"),
            (a.a_tilde, b.a_tilde, "ã"),
            (a.b_tilde, b.b_tilde, "b̃"),
            (a.alpha1, b.alpha1, "α₁"),
            (a.alpha2, b.alpha2, "α₂"),
            (a.disc, b.disc, "discriminant"),
        ] {
            w.see(rel(x, y), || format!("θ={th} {name}"));
        }
    }
    Ok(suite(
        "precision-continuity",
        "plain-double and double-double τ and root evaluations at the crossover",
        w,
        cfg.tol("precision_rel"),
    ))
}

fn cholesky(cfg: &ValidateConfig) -> Result<SuiteReport> {
    let mut w = Worst::new();
    for &th in &SWEEP_THETAS {
        let c = ScalarContext::new(th, 64)?;
        let f = axis_cholesky(&c)?;
        let res = (&f.l * f.l.transpose() - corr_matrix(&c).0).amax();
        w.see(res, || format!("θ={th} n=64 jitter={:?}", f.jitter));
    }
    Ok(suite(
        "cholesky",
        "sampler factor reconstructs the correlation matrix",
        w,
        cfg.tol("cholesky_residual"),
    ))
}

/// Runs every suite.
pub fn run(cfg: &ValidateConfig) -> Result<ValidationReport> {
    if cfg.max_n < 2 || cfg.sweep_n < 2 {
        return Err(GridError::Domain("validation sizes must be at least 2".into()));
    }
    let mut suites = vec![
        determinant(cfg)?,
        cofactors(cfg)?,
        inverse_entries(cfg)?,
        inverse_residual(cfg)?,
    ];
    suites.extend(asymptotic(cfg)?);
    suites.extend(traces(cfg)?);
    suites.extend(likelihood(cfg)?);
    suites.push(fisher(cfg)?);
    suites.push(precision(cfg)?);
    suites.push(cholesky(cfg)?);
    Ok(ValidationReport {
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}
