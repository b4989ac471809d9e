//! The four τ-sequences that appear after row-reducing `R_{θ,n}` and its
//! minors to almost upper triangular form.

use crate::dd::{DoubleDouble, Scalar};
use crate::error::{GridError, Result};
use crate::kernel::ScalarContext;
use serde::{Deserialize, Serialize};

/// Below this `w`, automatic dispatch evaluates the τ-family and the root
/// quantities in double-double before rounding to f64. The closed-form
/// minors always use double-double constants.
pub const WIDE_PRECISION_THRESHOLD: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauKind {
    Tau,
    TauStar,
    TauHat,
    TauTilde,
}

impl std::str::FromStr for TauKind {
    type Err = GridError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau" => Ok(Self::Tau),
            "tau_star" => Ok(Self::TauStar),
            "tau_hat" => Ok(Self::TauHat),
            "tau_tilde" => Ok(Self::TauTilde),
            _ => Err(GridError::Domain(format!("unknown tau family '{s}'"))),
        }
    }
}

/// Which arithmetic evaluates the cancellation-prone scalars.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    /// Double-double below [`WIDE_PRECISION_THRESHOLD`], f64 above.
    Auto,
    Double,
    DoubleDouble,
}

impl Precision {
    pub fn wide(self, w: f64) -> bool {
        match self {
            Precision::Auto => w < WIDE_PRECISION_THRESHOLD,
            Precision::Double => false,
            Precision::DoubleDouble => true,
        }
    }
}

/// `(1 + k w) u^k` with `u^k = exp(-k w)`.
fn lag<T: Scalar>(w: T, k: i64) -> T {
    let kw = T::from_f64(k as f64) * w;
    (T::one() + kw) * (-kw).exp()
}

/// `u^k` for a nonnegative power.
fn upow<T: Scalar>(w: T, k: i64) -> T {
    (-(T::from_f64(k as f64) * w)).exp()
}

pub(crate) fn tau_minus_one<T: Scalar>(w: T) -> T {
    (w - T::one()) * upow(w, 1) + (T::one() + w) * upow(w, 3)
}

/// Evaluates one τ-family member at `k >= -2` in the arithmetic `T`.
pub fn tau_in<T: Scalar>(w: T, k: i64, kind: TauKind) -> T {
    let one = T::one();
    let two = T::from_f64(2.0);
    let three = T::from_f64(3.0);
    let half = T::from_f64(0.5);
    match kind {
        TauKind::Tau => match k {
            -2 => T::zero(),
            -1 => tau_minus_one(w),
            _ => lag(w, k) - two * lag(w, k + 1) * upow(w, 1) + lag(w, k + 2) * upow(w, 2),
        },
        TauKind::TauStar => {
            if k < 0 {
                T::zero()
            } else {
                lag(w, k) - (one + w) * lag(w, k + 1) * upow(w, 1)
            }
        }
        TauKind::TauHat => match k {
            -2 => two * tau_minus_one(w) * upow(w, 1),
            -1 => (one + w) * upow(w, 1) - three * (one + w) * upow(w, 3) + two * (one + two * w) * upow(w, 5),
            _ => lag(w, k) - three * lag(w, k + 2) * upow(w, 2) + two * lag(w, k + 3) * upow(w, 3),
        },
        TauKind::TauTilde => match k {
            -2 => tau_minus_one(w) * upow(w, 1) * half,
            -1 => ((two * w - one) * upow(w, 1) + (one + two * w) * upow(w, 5)) * half,
            _ => (two * lag(w, k) - three * lag(w, k + 1) * upow(w, 1) + lag(w, k + 3) * upow(w, 3)) * half,
        },
    }
}

/// Evaluates τ-family members for one `(θ, n)`, switching to double-double
/// for small `w`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauFamily {
    pub w: f64,
    pub wide: bool,
}

impl TauFamily {
    pub fn new(ctx: &ScalarContext) -> Self {
        Self::with_precision(ctx, Precision::Auto)
    }

    pub fn with_precision(ctx: &ScalarContext, precision: Precision) -> Self {
        Self {
            w: ctx.w,
            wide: precision.wide(ctx.w),
        }
    }

    pub fn eval(&self, k: i64, kind: TauKind) -> f64 {
        debug_assert!(k >= -2);
        if self.wide {
            tau_in(DoubleDouble::from_f64(self.w), k, kind).to_f64()
        } else {
            tau_in(self.w, k, kind)
        }
    }

    pub fn tau(&self, k: i64) -> f64 {
        self.eval(k, TauKind::Tau)
    }
    pub fn tau_star(&self, k: i64) -> f64 {
        self.eval(k, TauKind::TauStar)
    }
    pub fn tau_hat(&self, k: i64) -> f64 {
        self.eval(k, TauKind::TauHat)
    }
    pub fn tau_tilde(&self, k: i64) -> f64 {
        self.eval(k, TauKind::TauTilde)
    }
}

pub fn tau_values(ctx: &ScalarContext, k: i64, family: TauKind) -> Result<f64> {
    if k < -2 {
        return Err(GridError::Domain(format!("tau index must be >= -2, got {k}")));
    }
    Ok(TauFamily::new(ctx).eval(k, family))
}
