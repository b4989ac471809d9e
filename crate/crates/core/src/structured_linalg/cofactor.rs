//! Minors `|R_{θ,n;-i,-j}|` (row `i` and column `j` deleted).

use super::roots::AxisScalars;
use super::tau::TauFamily;
use crate::error::{GridError, Result};
use crate::kernel::ScalarContext;
use crate::signed_log::SignedLog;

/// Below this size the closed-form index ranges collapse; use the recurrence.
pub const CLOSED_FORM_MIN_N: usize = 6;

fn sl(x: f64) -> SignedLog {
    SignedLog::from_f64(x)
}

/// Maps `(i, j)` to the equivalent cell with `i <= j` and `i + j >= n + 1`
/// using symmetry and persymmetry of `R`; both preserve the minor.
pub fn canonicalize(n: usize, i: usize, j: usize) -> Result<(usize, usize)> {
    if i < 1 || j < 1 || i > n || j > n {
        return Err(GridError::Index { i, j, n });
    }
    let cands = [(i, j), (j, i), (n + 1 - j, n + 1 - i), (n + 1 - i, n + 1 - j)];
    Ok(*cands
        .iter()
        .find(|&&(a, b)| a <= b && a + b > n)
        .expect("one image always lies in the canonical region"))
}

/// Entry `(k, l)` (1-based) of the almost upper triangular reduction of
/// `R_{θ,n;-i,-j}`, for canonical `(i, j)`.
fn reduced_entry(ctx: &ScalarContext, fam: &TauFamily, i: usize, j: usize, k: usize, l: usize) -> f64 {
    if k >= l + 2 {
        return 0.0;
    }
    let lag = |d: i64| ctx.lag(d.unsigned_abs() as usize);
    let (k_, l_, i_) = (k as i64, l as i64, i as i64);
    let left = l < j;
    match i {
        1 => {
            if k <= 2 {
                lag(if left { l_ - k_ - 1 } else { l_ - k_ })
            } else {
                fam.tau(if left { l_ - k_ - 1 } else { l_ - k_ })
            }
        }
        2 => match k {
            1 => lag(if left { l_ - 1 } else { l_ }),
            2 => lag(if left { l_ - 3 } else { l_ - 2 }),
            3 => fam.tau_tilde(if left { l_ - 4 } else { l_ - 3 }),
            _ => fam.tau(if left { l_ - k_ - 1 } else { l_ - k_ }),
        },
        _ => {
            if k <= 2 {
                lag(if left { l_ - k_ } else { l_ - k_ + 1 })
            } else if k < i {
                fam.tau(if left { l_ - k_ } else { l_ - k_ + 1 })
            } else if k == i {
                fam.tau_hat(if left { l_ - i_ - 1 } else { l_ - i_ })
            } else if k == i + 1 {
                fam.tau_tilde(if left { l_ - i_ - 2 } else { l_ - i_ - 1 })
            } else {
                fam.tau(if left { l_ - k_ - 1 } else { l_ - k_ })
            }
        }
    }
}

/// Determinant of an upper Hessenberg matrix by expansion along the last
/// column, accumulated in log space. `h(k, l)` is 1-based.
pub(crate) fn hessenberg_det(m: usize, h: impl Fn(usize, usize) -> f64) -> SignedLog {
    let mut dets = vec![SignedLog::ONE; m + 1];
    for q in 1..=m {
        let mut terms = Vec::with_capacity(q);
        let mut sub = SignedLog::ONE;
        for k in 0..q {
            let row = q - k;
            let t = SignedLog::parity(k as i64) * sl(h(row, q)) * dets[q - k - 1] * sub;
            terms.push(t);
            if row >= 2 {
                sub = sub * sl(h(row, row - 1));
                if sub.is_zero() {
                    break;
                }
            }
        }
        dets[q] = SignedLog::sum(terms);
    }
    dets[m]
}

/// `|R_{θ,n;-i,-j}|` via the Hessenberg recurrence on the row-reduced minor.
pub fn cofactor_recurrence(ctx: &ScalarContext, i: usize, j: usize) -> Result<SignedLog> {
    let (i, j) = canonicalize(ctx.n, i, j)?;
    let fam = TauFamily::new(ctx);
    let m = ctx.n - 1;
    let mut a = vec![0.0; m * m];
    for k in 1..=m {
        for l in k.saturating_sub(1).max(1)..=m {
            a[(k - 1) * m + (l - 1)] = reduced_entry(ctx, &fam, i, j, k, l);
        }
    }
    Ok(hessenberg_det(m, |k, l| a[(k - 1) * m + (l - 1)]))
}

impl AxisScalars {
    fn c(&self, k: usize, idx: usize) -> SignedLog {
        sl(self.constants.get(k, idx))
    }

    /// `P₁^{e₁} P₂^{e₂} τ_{-1}^f / P₁^{shift}`, assembled as
    /// `P₁^{e₁+e₂+f−shift} (α₂/α₁)^{e₂} (τ_{-1}/P₁)^f`. With `shift` set to
    /// the power of `P₁` in `|R|`, inverse entries never raise `P₁` to a
    /// large power in log space, where the rounding grows with the exponent.
    fn mono(&self, e1: i64, e2: i64, f: i64, shift: i64) -> SignedLog {
        let r = sl(self.roots.alpha2 / self.roots.alpha1);
        let rho = sl(self.t1 / self.p[0]);
        sl(self.p[0]).powi(e1 + e2 + f - shift) * r.powi(e2) * rho.powi(f)
    }

    /// `(C_{k,1} AT₁ P₁^e − C_{k,2} AT₂ P₂^e) τ_{-1}^f / (α₁ − α₂)`.
    fn two_root_at(&self, k: usize, e: i64, f: i64, shift: i64) -> SignedLog {
        (self.c(k, 1) * sl(self.at[0]) * self.mono(e, 0, f, shift)
            - self.c(k, 2) * sl(self.at[1]) * self.mono(0, e, f, shift))
            / sl(self.alpha_diff)
    }

    /// Diagonal and first off-diagonal interior minors, built from the
    /// constant pair `(ka, kb)`; `m = n − 1`.
    fn interior_pair(&self, i: i64, ka: usize, kb: usize, shift: i64) -> SignedLog {
        let m = self.ctx.n as i64 - 1;
        let u = self.u();
        let (a1, a2) = (self.roots.alpha1, self.roots.alpha2);
        let d2 = sl(self.alpha_diff).powi(2);
        let (at1, at2) = (sl(self.at[0]), sl(self.at[1]));
        let p11 = self.mono(m - 4, 0, 1, shift);
        let p22 = self.mono(0, m - 4, 1, shift);
        let cross12 = self.mono(i - 3, m - i - 1, 1, shift);
        let cross21 = self.mono(m - i - 1, i - 3, 1, shift);
        let u4 = sl(u.powi(4));
        let u6 = sl(u.powi(6));
        let g1 = sl(a1 - u * u);
        let g2 = sl(a2 - u * u);
        let terms = [
            self.c(ka, 1) * u4 * at1 * (g1 * p11 - g2 * cross12),
            -(self.c(ka, 2) * u4 * at2 * (g1 * cross21 - g2 * p22)),
            self.c(kb, 1) * u6 * at1 * (p11 - cross12),
            -(self.c(kb, 2) * u6 * at2 * (cross21 - p22)),
        ];
        SignedLog::sum(terms) / d2
    }

    /// Interior minor for `i + 2 <= j <= n − 1`.
    fn interior_far(&self, i: i64, j: i64, shift: i64) -> SignedLog {
        let n = self.ctx.n as i64;
        let d2 = sl(self.alpha_diff).powi(2);
        let f = j - i - 2;
        let (ab1, ab2) = (sl(self.ab[0]), sl(self.ab[1]));
        let mono = |e1, e2| self.mono(e1, e2, f, shift);
        let first = self.c(6, 1) * sl(self.at[0]) * (ab1 * mono(n - j + i - 4, 0) - ab2 * mono(i - 3, n - j - 1));
        let second = self.c(6, 2) * sl(self.at[1]) * (ab1 * mono(n - j - 1, i - 3) - ab2 * mono(0, n - j + i - 4));
        (first - second) / d2
    }

    /// `|R_{θ,n;m}| / P₁^{shift}`.
    pub(crate) fn leading_block_scaled(&self, m: usize, shift: i64) -> SignedLog {
        if m <= 1 {
            return sl(self.p[0]).powi(-shift);
        }
        let k = m as i64 - 2;
        let ratio = self.roots.alpha2 / self.roots.alpha1;
        let inner = self.at[0] - self.at[1] * ratio.powi(k as i32);
        self.mono(k, 0, 0, shift) * sl(inner) / sl(self.alpha_diff)
    }

    /// Closed-form minor of a canonical cell divided by `P₁^{shift}`; `None`
    /// when `n` is too small.
    pub(crate) fn minor_scaled(&self, i: usize, j: usize, shift: i64) -> Option<SignedLog> {
        let n = self.ctx.n;
        if n < CLOSED_FORM_MIN_N {
            return None;
        }
        let (ii, jj, nn) = (i as i64, j as i64, n as i64);
        let w = self.ctx.w;
        let u = self.u();
        Some(match (i, j) {
            (1, _) if j == n => sl(w * w * u * u) * self.mono(0, 0, nn - 3, shift),
            (2, _) if j + 1 >= n => self.mono(0, 0, jj - 4, shift) * sl(self.edge) * self.toeplitz_tau_det(n - j),
            _ if i == n => self.leading_block_scaled(n - 1, shift),
            _ if i >= 3 && j == i && i == n - 1 => self.two_root_at(7, ii - 3, 0, shift),
            _ if i >= 3 && j == i => self.interior_pair(ii, 1, 2, shift),
            _ if i >= 3 && j == i + 1 && i == n - 1 => self.two_root_at(3, ii - 3, 0, shift),
            _ if i >= 3 && j == i + 1 => self.interior_pair(ii, 4, 5, shift),
            _ if i >= 3 && j == n => self.two_root_at(6, ii - 3, nn - ii - 2, shift),
            _ if i >= 3 && j >= i + 2 => self.interior_far(ii, jj, shift),
            _ => return None,
        })
    }

    /// Closed-form minor for a canonical cell; `None` when `n` is too small.
    pub fn minor_closed(&self, i: usize, j: usize) -> Option<SignedLog> {
        self.minor_scaled(i, j, 0)
    }
}

/// `|R_{θ,n;-i,-j}|` from the closed forms, falling back to the recurrence
/// for cells without one.
pub fn cofactor_closed(ctx: &ScalarContext, i: usize, j: usize) -> Result<SignedLog> {
    let (ci, cj) = canonicalize(ctx.n, i, j)?;
    let s = AxisScalars::new(ctx)?;
    match s.minor_closed(ci, cj) {
        Some(v) => Ok(v),
        None => cofactor_recurrence(ctx, ci, cj),
    }
}
