//! Large-`n` approximations of the determinant and inverse of `R_{θ,n}`,
//! trace expansions, and the θ-derivatives of `R_{θ,n}`.

use crate::error::{GridError, Result};
use crate::kernel::{corr_matrix, ScalarContext};
use crate::signed_log::SignedLog;
use crate::structured_linalg::{canonicalize, inverse_matrix, AxisScalars};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Approximations refuse smaller grids.
pub const APPROX_MIN_N: usize = 8;

fn sl(x: f64) -> SignedLog {
    SignedLog::from_f64(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApproxForm {
    /// Dominant-root term of the exact determinant.
    Leading,
    /// Fully expanded in `w`.
    Expansion,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxLogDet {
    pub leading: SignedLog,
    pub expansion: SignedLog,
}

fn leading(s: &AxisScalars) -> SignedLog {
    let n = s.ctx.n as i64;
    sl(s.at[0]) * sl(s.p[0]).powi(n - 2) / sl(s.alpha_diff)
}

fn expansion(ctx: &ScalarContext) -> SignedLog {
    let (n, w) = (ctx.n as f64, ctx.w);
    let r3 = 3f64.sqrt();
    let log_mag = (3.0 * n - 4.0) * w.ln() - 2.0 * (n - 2.0) * w
        + (r3 / 4.0).ln()
        + (n - 1.0) * (2.0 * (2.0 + r3) / 3.0).ln()
        + ((12.0 + 7.0 * r3) * n * w * w / (60.0 + 30.0 * r3)).ln_1p();
    SignedLog::new(1, log_mag)
}

pub fn approx_logdet(ctx: &ScalarContext) -> Result<ApproxLogDet> {
    if ctx.n < 4 {
        return Err(GridError::Domain(format!(
            "determinant approximation needs n >= 4, got {}",
            ctx.n
        )));
    }
    let s = AxisScalars::new(ctx)?;
    Ok(ApproxLogDet {
        leading: leading(&s),
        expansion: expansion(ctx),
    })
}

pub fn logdet_approx(ctx: &ScalarContext, form: ApproxForm) -> Result<SignedLog> {
    let a = approx_logdet(ctx)?;
    Ok(match form {
        ApproxForm::Leading => a.leading,
        ApproxForm::Expansion => a.expansion,
    })
}

/// `leading / exact − 1`, evaluated from the neglected second-root term so
/// that it stays resolvable far below f64 epsilon.
pub fn leading_relative_error(ctx: &ScalarContext) -> Result<f64> {
    let s = AxisScalars::new(ctx)?;
    let n = ctx.n as i32;
    let q = (s.at[1] / s.at[0]) * (s.roots.alpha2 / s.roots.alpha1).powi(n - 2);
    Ok(q / (1.0 - q))
}

struct Approx<'a> {
    s: &'a AxisScalars,
    n: i64,
}

impl Approx<'_> {
    fn c(&self, k: usize, i: usize) -> SignedLog {
        sl(self.s.constants.get(k, i))
    }

    /// Dominant-root approximation of `(R^{-1})_{i,j}` when `(i,j)` lies in
    /// one of the boundary or interior families.
    fn family(&self, i: i64, j: i64) -> Option<SignedLog> {
        let s = self.s;
        let n = self.n;
        let (w, u, t1) = (s.ctx.w, s.u(), sl(s.t1));
        let (a1, a2) = (s.roots.alpha1, s.roots.alpha2);
        let diff = sl(s.alpha_diff);
        let r = sl(a2 / a1);
        let q = sl(s.at[1] / s.at[0]);
        let at1 = sl(s.at[0]);
        let (p1, p2) = (sl(s.p[0]), sl(s.p[1]));
        let edge = sl(s.edge);
        let neg_u_a1 = sl(-u / a1);
        let u_a1 = sl(u / a1);
        let par = SignedLog::parity;

        let v = if (i, j) == (n, n) || (i, j) == (1, 1) {
            sl(-1.0 / (s.big_b * a1))
        } else if (i, j) == (1, n) {
            par(n + 1) * sl(w * w * u * u) * diff / (t1 * at1) * neg_u_a1.powi(n - 2)
        } else if (i, j) == (2, n) || (i, j) == (n - 1, 1) {
            par(n + 2) * edge * diff / (t1.powi(2) * at1) * neg_u_a1.powi(n - 2)
        } else if (i, j) == (2, n - 1) {
            par(n - 3) * sl(s.tau0) * edge * diff / (t1.powi(3) * at1) * neg_u_a1.powi(n - 2)
        } else if (i, j) == (n - 1, n) || (i, j) == (2, 1) {
            -(self.c(3, 1) / p1.powi(2))
        } else if (i, j) == (n - 1, n - 1) {
            (self.c(7, 1) - self.c(7, 2) * q * r.powi(n - 4)) / p1.powi(2)
        } else if j == 1 && (3..=n - 2).contains(&i) {
            par(i + 1) * t1.powi(i - 3) * (self.c(6, 1) * p1.powi(n - i - 2) - self.c(6, 2) * q * p2.powi(n - i - 2))
                / p1.powi(n - 2)
        } else if j == n && (3..=n - 2).contains(&i) {
            par(n + i) * t1.powi(n - i - 2) * (self.c(6, 1) * p1.powi(i - 3) - self.c(6, 2) * q * p2.powi(i - 3))
                / p1.powi(n - 2)
        } else if (3..=n - 2).contains(&i) && (j == i || j == i + 1) {
            let (ka, kb, sign) = if j == i { (1, 2, 1.0) } else { (4, 5, -1.0) };
            let g1 = sl(a1 - u * u);
            let g2 = sl(a2 - u * u);
            let (u4, u6) = (sl(u.powi(4)), sl(u.powi(6)));
            let (ip1, ip2) = (p1.powi(-3), p2.powi(-3));
            let terms = [
                self.c(ka, 1) * t1 * u4 * (g1 * ip1 - g2 * ip1 * r.powi(n - i - 2)),
                -(self.c(ka, 2) * t1 * u4 * q * (g1 * ip2 * r.powi(i) - g2 * ip2 * r.powi(n - 2))),
                self.c(kb, 1) * t1 * u6 * (ip1 - ip1 * r.powi(n - i - 2)),
                -(self.c(kb, 2) * t1 * u6 * q * (ip2 * r.powi(i) - ip2 * r.powi(n - 2))),
            ];
            sl(sign) * SignedLog::sum(terms) / diff
        } else if i >= 3 && i + 2 <= j && j <= n - 1 {
            let (ab1, ab2) = (sl(s.ab[0]), sl(s.ab[1]));
            let body = self.c(6, 1) * (ab1 - ab2 * r.powi(n - j - 1))
                - self.c(6, 2) * q * (ab1 * r.powi(i - 3) - ab2 * r.powi(n - j + i - 4));
            u_a1.powi(j - i + 2) * body / (t1.powi(4) * diff)
        } else {
            return None;
        };
        Some(v)
    }

    /// Interior form of the last-column entries, expressed through powers
    /// of `u/α₁` rather than of `P₁`.
    fn last_column_interior(&self, i: i64) -> Option<SignedLog> {
        let s = self.s;
        let n = self.n;
        if !(3..=n - 2).contains(&i) {
            return None;
        }
        let u = s.u();
        let (a1, a2) = (s.roots.alpha1, s.roots.alpha2);
        let q = sl(s.at[1] / s.at[0]);
        let k = sl(u / a1).powi(n - i - 2);
        Some(self.c(6, 1) / sl(s.p[0]).powi(3) * k - self.c(6, 2) * q / sl(s.p[1]).powi(3) * k * sl(a2 / a1).powi(i))
    }
}

fn check_approx(ctx: &ScalarContext, i: usize, j: usize) -> Result<()> {
    if ctx.n < APPROX_MIN_N {
        return Err(GridError::Domain(format!(
            "inverse approximation needs n >= {APPROX_MIN_N}, got {}",
            ctx.n
        )));
    }
    canonicalize(ctx.n, i, j).map(|_| ())
}

/// Large-`n` approximation of `(R_{θ,n}^{-1})_{i,j}`. Cells outside the
/// tabulated families are reached through symmetry and persymmetry.
pub fn inverse_entry_approx(ctx: &ScalarContext, i: usize, j: usize) -> Result<f64> {
    check_approx(ctx, i, j)?;
    let s = AxisScalars::new(ctx)?;
    let a = Approx { s: &s, n: ctx.n as i64 };
    let n = ctx.n;
    let cands = [(i, j), (j, i), (n + 1 - j, n + 1 - i), (n + 1 - i, n + 1 - j)];
    for (a_i, a_j) in cands {
        if let Some(v) = a.family(a_i as i64, a_j as i64) {
            return Ok(v.to_f64());
        }
    }
    Err(GridError::Index { i, j, n })
}

/// The interior variant for `(i, n)`, `3 <= i <= n − 2`.
pub fn inverse_entry_approx_last_column(ctx: &ScalarContext, i: usize) -> Result<f64> {
    check_approx(ctx, i, ctx.n)?;
    let s = AxisScalars::new(ctx)?;
    let a = Approx { s: &s, n: ctx.n as i64 };
    a.last_column_interior(i as i64)
        .map(SignedLog::to_f64)
        .ok_or(GridError::Index { i, j: ctx.n, n: ctx.n })
}

/// Entrywise `∂R/∂θ` (order 1) or `∂²R/∂θ²` (order 2).
pub fn corr_matrix_derivatives(ctx: &ScalarContext, order: u8) -> Result<DMatrix<f64>> {
    if !(order == 1 || order == 2) {
        return Err(GridError::Domain(format!(
            "derivative order must be 1 or 2, got {order}"
        )));
    }
    let (n, w) = (ctx.n, ctx.w);
    let nf = n as f64;
    let lag: Vec<f64> = (0..n)
        .map(|k| {
            let kf = k as f64;
            let e = (-kf * w).exp();
            match order {
                1 => -kf * kf * w * e / nf,
                _ => -kf * kf * (1.0 - w * kf) * e / (nf * nf),
            }
        })
        .collect();
    Ok(DMatrix::from_fn(n, n, |i, j| lag[i.abs_diff(j)]))
}

/// Expansion of `(1/n) tr(R_θ^{-1} R_θ̃)` through `O(1/n)`.
pub fn trace_rinv_r(theta: f64, theta_tilde: f64, n: usize) -> f64 {
    let r = theta_tilde / theta;
    let w = theta / n as f64;
    r.powi(3) - (w / 4.0) * (3.0 * r.powi(4) - 2.0 * r * r - 1.0) + (1.0 + r * r - 2.0 * r.powi(3)) / n as f64
}

/// `(1/n) tr(R_θ^{-1} R_θ̃)` with the closed-form inverse.
pub fn trace_rinv_r_exact(theta: f64, theta_tilde: f64, n: usize) -> Result<f64> {
    let inv = inverse_matrix(&ScalarContext::new(theta, n)?)?;
    let r = corr_matrix(&ScalarContext::new(theta_tilde, n)?).0;
    Ok((inv * r).trace() / n as f64)
}

/// Expansions of `(1/n) tr[(∂_θ R^{-1}) R]` and `(1/n) tr[(∂²_θ R^{-1}) R]`.
pub fn trace_derivatives(theta: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    (
        -3.0 / theta + 2.0 * (theta + 2.0) / (theta * nf),
        12.0 / (theta * theta) - 2.0 * (4.0 * theta + 9.0) / (theta * theta * nf),
    )
}

/// Exact values of the two traces of [`trace_derivatives`], from
/// `∂R^{-1} = −R^{-1} R' R^{-1}` and
/// `∂²R^{-1} = 2 R^{-1} R' R^{-1} R' R^{-1} − R^{-1} R'' R^{-1}`.
pub fn trace_derivatives_exact(theta: f64, n: usize) -> Result<(f64, f64)> {
    let ctx = ScalarContext::new(theta, n)?;
    let inv = inverse_matrix(&ctx)?;
    let a = &inv * corr_matrix_derivatives(&ctx, 1)?;
    let b = &inv * corr_matrix_derivatives(&ctx, 2)?;
    let nf = n as f64;
    Ok((-a.trace() / nf, (2.0 * (&a * &a).trace() - b.trace()) / nf))
}

/// `(1/n) tr[(R_θ^{-1} R_θ̃)²]`, computed exactly.
pub fn trace_rinv_r_squared_bound(theta: f64, theta_tilde: f64, n: usize) -> Result<f64> {
    let inv = inverse_matrix(&ScalarContext::new(theta, n)?)?;
    let r = corr_matrix(&ScalarContext::new(theta_tilde, n)?).0;
    let m = inv * r;
    Ok((&m * &m).trace() / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structured_linalg::{inverse_entry, logdet_closed};

    fn ctx(theta: f64, n: usize) -> ScalarContext {
        ScalarContext::new(theta, n).unwrap()
    }

    #[test]
    fn leading_form_tracks_exact() {
        let c = ctx(1.0, 30);
        let a = logdet_approx(&c, ApproxForm::Leading).unwrap();
        let e = logdet_closed(&c).unwrap();
        assert!((a.log_mag - e.log_mag).exp_m1().abs() <= 1e-10);
    }

    #[test]
    fn leading_error_shrinks_geometrically() {
        let e8 = leading_relative_error(&ctx(1.0, 8)).unwrap();
        let e16 = leading_relative_error(&ctx(1.0, 16)).unwrap();
        let c = (2.0 - 3f64.sqrt()) / (2.0 + 3f64.sqrt());
        let ratio = e16 / e8;
        assert!(ratio > 0.5 * c.powi(8) && ratio < 2.0 * c.powi(8), "ratio {ratio:e}");
    }

    #[test]
    fn leading_error_matches_direct_difference_at_small_n() {
        for n in [4, 5, 6] {
            let c = ctx(1.0, n);
            let direct =
                (logdet_approx(&c, ApproxForm::Leading).unwrap().log_mag - logdet_closed(&c).unwrap().log_mag).exp_m1();
            let tail = leading_relative_error(&c).unwrap();
            // The direct difference carries f64 rounding of the two log magnitudes.
            assert!((direct - tail).abs() < 1e-9 * tail.abs() + 1e-14, "n={n}");
        }
    }

    #[test]
    fn expansion_first_order() {
        let c = ctx(0.5, 100);
        let a = logdet_approx(&c, ApproxForm::Expansion).unwrap();
        let e = logdet_closed(&c).unwrap();
        // Relative error in the determinant of order w.
        assert!((a.log_mag - e.log_mag).abs() < 10.0 * c.w);
    }

    #[test]
    fn refuses_small_n() {
        assert!(logdet_approx(&ctx(1.0, 3), ApproxForm::Leading).is_err());
        assert!(inverse_entry_approx(&ctx(1.0, 7), 1, 1).is_err());
    }

    #[test]
    fn corner_entries() {
        let c = ctx(1.0, 30);
        let s = AxisScalars::new(&c).unwrap();
        let exact = inverse_entry(&c, 30, 30).unwrap();
        let approx = inverse_entry_approx(&c, 30, 30).unwrap();
        assert!((approx / exact - 1.0).abs() < 1e-10);
        assert!((approx * s.big_b * s.roots.alpha1 + 1.0).abs() < 1e-14);
        assert_eq!(approx, inverse_entry_approx(&c, 1, 1).unwrap());
        let c = ctx(2.0, 40);
        let (e, a) = (
            inverse_entry(&c, 10, 20).unwrap(),
            inverse_entry_approx(&c, 10, 20).unwrap(),
        );
        assert!((a / e - 1.0).abs() < 1e-9);
    }

    #[test]
    fn every_cell_is_covered() {
        for n in [8, 9, 13, 30] {
            let c = ctx(1.0, n);
            for i in 1..=n {
                for j in 1..=n {
                    assert!(inverse_entry_approx(&c, i, j).is_ok(), "n={n} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn last_column_variants_agree() {
        let c = ctx(1.0, 30);
        for i in 3..=28 {
            let a = inverse_entry_approx(&c, i, 30).unwrap();
            let b = inverse_entry_approx_last_column(&c, i).unwrap();
            let e = inverse_entry(&c, i, 30).unwrap();
            assert!((a / e - 1.0).abs() < 1e-9 && (b / e - 1.0).abs() < 1e-9, "i={i}");
        }
    }

    #[test]
    fn derivative_matrices() {
        let c = ctx(1.0, 10);
        let d1 = corr_matrix_derivatives(&c, 1).unwrap();
        let d2 = corr_matrix_derivatives(&c, 2).unwrap();
        for i in 0..10 {
            assert_eq!(d1[(i, i)], 0.0);
            assert_eq!(d2[(i, i)], 0.0);
        }
        let w = c.w;
        assert!((d2[(0, 1)] + (1.0 - w) * (-w).exp() / 100.0).abs() < 1e-16);
        let h = 1e-5;
        let rp = corr_matrix(&ctx(1.0 + h, 10)).0;
        let rm = corr_matrix(&ctx(1.0 - h, 10)).0;
        let r0 = corr_matrix(&c).0;
        assert!(((&rp - &rm) / (2.0 * h) - &d1).amax() < 1e-7);
        assert!(((&rp - 2.0 * &r0 + &rm) / (h * h) - &d2).amax() < 1e-5);
        assert!(corr_matrix_derivatives(&c, 3).is_err());
    }

    #[test]
    fn trace_formula_values() {
        assert!((trace_rinv_r(1.3, 1.3, 50) - 1.0).abs() < 1e-15);
        assert!((trace_rinv_r(1.0, 2.0, 100) - 7.7925).abs() < 1e-12);
        let (a, _) = trace_derivatives(1.0, 100);
        assert!((a + 2.94).abs() < 1e-12);
        let (_, b) = trace_derivatives(2.0, 100);
        assert!((b - 2.915).abs() < 1e-12);
    }

    #[test]
    fn trace_formula_error_is_second_order() {
        let err = |n| (trace_rinv_r(1.0, 2.0, n) - trace_rinv_r_exact(1.0, 2.0, n).unwrap()).abs();
        let (e16, e32, e64) = (err(16), err(32), err(64));
        assert!(e16 / e32 > 3.0 && e16 / e32 < 5.0);
        assert!(e32 / e64 > 3.0 && e32 / e64 < 5.0);
        let derr = |n| {
            let (a, b) = trace_derivatives(1.0, n);
            let (x, y) = trace_derivatives_exact(1.0, n).unwrap();
            ((a - x).abs(), (b - y).abs())
        };
        let (d32, d64) = (derr(32), derr(64));
        assert!(d32.0 / d64.0 > 3.0 && d32.1 / d64.1 > 3.0);
    }

    #[test]
    fn squared_trace_bounded() {
        assert!((trace_rinv_r_squared_bound(1.4, 1.4, 20).unwrap() - 1.0).abs() < 1e-7);
        let v: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| trace_rinv_r_squared_bound(1.0, 2.0, n).unwrap())
            .collect();
        let (lo, hi) = v.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        assert!((hi - lo) / lo < 0.2);
        let x = trace_rinv_r_squared_bound(2.0, 0.5, 32).unwrap();
        assert!(x.is_finite() && x > 0.0);
    }
}
