//! Quadratic roots and the fourteen auxiliary constants that parameterize
//! the closed-form determinant and cofactors.

use super::tau::{tau_in, Precision, TauKind};
use crate::dd::{DoubleDouble, Scalar};
use crate::error::{GridError, Result};
use crate::kernel::ScalarContext;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootPair {
    pub a: f64,
    pub b: f64,
    pub a_tilde: f64,
    pub b_tilde: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub disc: f64,
}

/// `c[k-1][i-1]` holds `C_{k,i}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinorConstants {
    pub c: [[f64; 2]; 7],
}

impl MinorConstants {
    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.c[k - 1][i - 1]
    }
}

/// Every per-axis scalar the closed forms consume, evaluated in one pass and
/// rounded to f64.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisScalars {
    pub ctx: ScalarContext,
    pub wide: bool,
    pub roots: RootPair,
    pub constants: MinorConstants,
    /// `τ_{-1}`.
    pub t1: f64,
    pub tau0: f64,
    pub tau_star1: f64,
    /// `b + τ_{-1} u`.
    pub big_b: f64,
    /// `α₁ − α₂`, formed before rounding.
    pub alpha_diff: f64,
    /// `P_i = −(b + τ_{-1}u) α_i`.
    pub p: [f64; 2],
    /// `ã α_i + u² b̃`.
    pub at: [f64; 2],
    /// `a α_i + u² b`.
    pub ab: [f64; 2],
    /// `τ̃_{-2}[(1+2w)²u⁴ − 1] + τ̃_{-1} τ*_1`.
    pub edge: f64,
}

struct Raw<T> {
    roots: [T; 7],
    c: [[T; 2]; 7],
    t1: T,
    tau0: T,
    tau_star1: T,
    big_b: T,
    alpha_diff: T,
    p: [T; 2],
    at: [T; 2],
    ab: [T; 2],
    edge: T,
}

fn compute<T: Scalar>(w64: f64) -> std::result::Result<Raw<T>, String> {
    let w = T::from_f64(w64);
    let one = T::one();
    let two = T::from_f64(2.0);
    let three = T::from_f64(3.0);
    let four = T::from_f64(4.0);
    let u = (-w).exp();
    let u2 = u * u;
    let u3 = u2 * u;
    let u4 = u2 * u2;
    let u6 = u4 * u2;

    let t1 = tau_in(w, -1, TauKind::Tau);
    let a = one - two * u2 + u4 - two * u2 * w + two * u4 * w;
    // b = w(1 − u⁴) − (1 − u²)² is O(w⁴); written through s = 1 − u² the
    // cancellation drops to O(w) → O(w³).
    let s = -(-two * w).exp_m1();
    let b = s * (w * (two - s) - s);
    let at = one - u2 - two * u2 * w - u2 * w * w;
    let bt = u2 + w + u2 * w - one;
    let big_b = b + t1 * u;
    let big_a = a - two * t1 * u;
    let disc = big_a * big_a - four * t1 * u * big_b;
    if !(disc.to_f64() > 0.0) {
        return Err(format!("nonpositive discriminant {:e}", disc.to_f64()));
    }
    let sq = disc.sqrt();
    let a1 = (-big_a - sq) / (two * big_b);
    let a2 = (-big_a + sq) / (two * big_b);
    let alpha = [a1, a2];

    let th = |k: i64| tau_in(w, k, TauKind::TauHat);
    let tt = |k: i64| tau_in(w, k, TauKind::TauTilde);
    let (th_m2, th_m1, th0, th1) = (th(-2), th(-1), th(0), th(1));
    let (tt_m2, tt_m1, tt0) = (tt(-2), tt(-1), tt(0));
    let om = (one - u2) * (one - u2);
    let poly2 = w * (two - T::from_f64(6.0) * u2 + four * u4) + om;
    let poly3 = w * (three - T::from_f64(8.0) * u2 + T::from_f64(5.0) * u4) + om;
    let poly1 = w * (one - four * u2 + three * u4) + om;
    let q = two - three * u2 + u6;
    let r = one - three * u4 + two * u6;

    let mut c = [[T::zero(); 2]; 7];
    for i in 0..2 {
        let d = big_b * alpha[i] - t1 * u;
        if d.to_f64() == 0.0 || !d.to_f64().is_finite() {
            return Err("vanishing constant denominator".into());
        }
        let d2 = d * d;
        c[0][i] = th_m2 * tt0 * poly2 / (t1 * u2 * d)
            + w * th_m2 * tt0 * om / (u * d2)
            + (th0 * tt0 - th1 * tt_m1) / (t1 * u4)
            - th_m2 * tt_m1 * poly3 / (t1 * u * d)
            - w * th_m2 * tt_m1 * om / d2;
        c[1][i] = w * th_m2 * q * poly2 / (two * t1 * u2 * d)
            + w * w * th_m2 * q * om / (two * u * d2)
            + w * th0 * q / (two * t1 * u4)
            - w * om * th_m2 * tt_m1 / (t1 * u * d)
            - w * r * tt_m1 / (t1 * u3);
        c[2][i] = th_m1 + th_m2 * u * poly1 / d + w * t1 * u2 * th_m2 * om / d2;
        c[3][i] = th_m1 * tt0 / (t1 * u4) + th_m2 * tt0 * poly1 / (t1 * u3 * d) + w * th_m2 * tt0 * om / (u2 * d2)
            - th1 * tt_m2 / (t1 * u4)
            - th_m2 * tt_m2 * poly3 / (t1 * u * d)
            - w * th_m2 * tt_m2 * om / d2;
        c[4][i] = w * th_m1 * q / (two * t1 * u4)
            + w * th_m2 * q * poly1 / (two * t1 * u3 * d)
            + w * w * th_m2 * q * om / (two * u2 * d2)
            - w * th_m2 * tt_m2 * om / (t1 * u * d)
            - w * r * tt_m2 / (t1 * u3);
        c[5][i] = th_m1 * tt_m1 - th0 * tt_m2 + th_m2 * u * tt_m1 * poly1 / d - th_m2 * tt_m2 * u2 * poly2 / d
            + w * t1 * u2 * th_m2 * (tt_m1 - u * tt_m2) * om / d2;
        c[6][i] = th_m2 * u2 * poly2 / d + w * t1 * th_m2 * u3 * om / d2 + th0;
    }

    let tau_star1 = tau_in(w, 1, TauKind::TauStar);
    let onetw = one + two * w;
    let edge = tt_m2 * (onetw * onetw * u4 - one) + tt_m1 * tau_star1;
    Ok(Raw {
        roots: [a, b, at, bt, a1, a2, disc],
        c,
        t1,
        tau0: tau_in(w, 0, TauKind::Tau),
        tau_star1,
        big_b,
        alpha_diff: -sq / big_b,
        p: [-big_b * a1, -big_b * a2],
        at: [at * a1 + u2 * bt, at * a2 + u2 * bt],
        ab: [a * a1 + u2 * b, a * a2 + u2 * b],
        edge,
    })
}

fn round<T: Scalar>(ctx: &ScalarContext, wide: bool, r: Raw<T>) -> Result<AxisScalars> {
    let f = |x: T| x.to_f64();
    let pair = |x: [T; 2]| [f(x[0]), f(x[1])];
    let mut c = [[0.0; 2]; 7];
    for k in 0..7 {
        c[k] = pair(r.c[k]);
        if !c[k].iter().all(|x| x.is_finite()) {
            return Err(GridError::Numerical(format!("constant C_{} is not finite", k + 1)));
        }
    }
    let [a, b, a_tilde, b_tilde, alpha1, alpha2, disc] = r.roots.map(f);
    Ok(AxisScalars {
        ctx: *ctx,
        wide,
        roots: RootPair {
            a,
            b,
            a_tilde,
            b_tilde,
            alpha1,
            alpha2,
            disc,
        },
        constants: MinorConstants { c },
        t1: f(r.t1),
        tau0: f(r.tau0),
        tau_star1: f(r.tau_star1),
        big_b: f(r.big_b),
        alpha_diff: f(r.alpha_diff),
        p: pair(r.p),
        at: pair(r.at),
        ab: pair(r.ab),
        edge: f(r.edge),
    })
}

impl AxisScalars {
    /// Always in double-double. Above the τ crossover the f64 constants
    /// still carry ~1e−9 relative error from cancellation, which the inverse
    /// amplifies by `‖R⁻¹‖`; the per-axis cost is negligible either way.
    pub fn new(ctx: &ScalarContext) -> Result<Self> {
        Self::with_precision(ctx, Precision::DoubleDouble)
    }

    pub fn with_precision(ctx: &ScalarContext, precision: Precision) -> Result<Self> {
        let wide = precision.wide(ctx.w);
        let err = |m: String| GridError::Numerical(format!("θ={}, n={}: {m}", ctx.theta, ctx.n));
        if wide {
            round(ctx, wide, compute::<DoubleDouble>(ctx.w).map_err(err)?)
        } else {
            round(ctx, wide, compute::<f64>(ctx.w).map_err(err)?)
        }
    }

    /// `u` as used by the closed forms.
    pub fn u(&self) -> f64 {
        self.ctx.u
    }
}

pub fn roots(ctx: &ScalarContext) -> Result<RootPair> {
    Ok(AxisScalars::new(ctx)?.roots)
}

pub fn minor_constants(ctx: &ScalarContext) -> Result<MinorConstants> {
    Ok(AxisScalars::new(ctx)?.constants)
}
