//! Sign-tracked log-magnitude numbers for products that leave the f64 range.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// `sign * exp(log_mag)`. Zero is `sign = 0, log_mag = -inf`.
///
/// Products are exact in sign and add log magnitudes. Sums use a signed
/// log-sum-exp; the relative error of a sum is a few ulps of the larger
/// operand's magnitude, amplified only by genuine cancellation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedLog {
    pub sign: i8,
    pub log_mag: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        sign: 0,
        log_mag: f64::NEG_INFINITY,
    };
    pub const ONE: SignedLog = SignedLog { sign: 1, log_mag: 0.0 };

    pub fn new(sign: i8, log_mag: f64) -> Self {
        if sign == 0 || log_mag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                sign: sign.signum(),
                log_mag,
            }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: if x > 0.0 { 1 } else { -1 },
                log_mag: x.abs().ln(),
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        self.sign as f64 * self.log_mag.exp()
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn powi(self, k: i64) -> Self {
        if k == 0 {
            return Self::ONE;
        }
        if self.sign == 0 {
            return if k > 0 { Self::ZERO } else { Self::new(1, f64::INFINITY) };
        }
        let sign = if self.sign < 0 && k % 2 != 0 { -1 } else { 1 };
        Self::new(sign, self.log_mag * k as f64)
    }

    /// `(-1)^k`.
    pub fn parity(k: i64) -> Self {
        if k.rem_euclid(2) == 0 {
            Self::ONE
        } else {
            -Self::ONE
        }
    }

    pub fn recip(self) -> Self {
        Self::new(self.sign, -self.log_mag)
    }

    /// Sum of many terms, combined around the largest magnitude.
    pub fn sum<I: IntoIterator<Item = SignedLog>>(terms: I) -> Self {
        let terms: Vec<SignedLog> = terms.into_iter().filter(|t| t.sign != 0).collect();
        let Some(max) = terms
            .iter()
            .map(|t| t.log_mag)
            .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))))
        else {
            return Self::ZERO;
        };
        if !max.is_finite() {
            return terms.into_iter().fold(Self::ZERO, |a, b| a + b);
        }
        let s: f64 = terms.iter().map(|t| t.sign as f64 * (t.log_mag - max).exp()).sum();
        let mut out = Self::from_f64(s);
        out.log_mag += max;
        out
    }
}

impl Mul for SignedLog {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.sign * o.sign, self.log_mag + o.log_mag)
    }
}

impl Div for SignedLog {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl Neg for SignedLog {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.sign, self.log_mag)
    }
}

impl Add for SignedLog {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        if self.sign == 0 {
            return o;
        }
        if o.sign == 0 {
            return self;
        }
        let (big, small) = if self.log_mag >= o.log_mag {
            (self, o)
        } else {
            (o, self)
        };
        if big.log_mag == f64::INFINITY {
            return big;
        }
        let r = (small.log_mag - big.log_mag).exp();
        if big.sign == small.sign {
            Self::new(big.sign, big.log_mag + r.ln_1p())
        } else if r == 1.0 {
            Self::ZERO
        } else {
            Self::new(big.sign, big.log_mag + (-r).ln_1p())
        }
    }
}

impl Sub for SignedLog {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl From<f64> for SignedLog {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}
