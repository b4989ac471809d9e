use super::roots::AxisScalars;
use super::tau::TauFamily;
use crate::error::{GridError, Result};
use crate::kernel::ScalarContext;
use crate::signed_log::SignedLog;

fn sl(x: f64) -> SignedLog {
    SignedLog::from_f64(x)
}

impl AxisScalars {
    /// Determinant of the leading `m × m` block of `R_{θ,n}`, `m <= n`,
    /// as `P₁^{m-2} [AT₁ − AT₂ (α₂/α₁)^{m-2}] / (α₁ − α₂)`.
    pub fn leading_block_det(&self, m: usize) -> SignedLog {
        if m <= 1 {
            return SignedLog::ONE;
        }
        self.leading_block_scaled(m, 0)
    }

    /// `|Ã_m|`, the determinant of the `m × m` Toeplitz Hessenberg matrix
    /// with entries `τ_{c-r}`; `|Ã_0| = 1`.
    pub fn toeplitz_tau_det(&self, m: usize) -> SignedLog {
        if m == 0 {
            return SignedLog::ONE;
        }
        let r = &self.roots;
        let u2 = self.u() * self.u();
        let m = m as i64;
        let pow_diff = |k: i64| {
            if k == 0 {
                SignedLog::ZERO
            } else {
                sl(r.alpha1).powi(k) - sl(r.alpha2).powi(k)
            }
        };
        let bracket = sl(r.a) * pow_diff(m) + sl(u2 * r.b) * pow_diff(m - 1);
        SignedLog::parity(m + 1) * sl(self.big_b).powi(m - 1) * bracket / sl(self.alpha_diff)
    }
}

/// `log |R_{θ,n}|` from the closed form.
pub fn logdet_closed(ctx: &ScalarContext) -> Result<SignedLog> {
    Ok(AxisScalars::new(ctx)?.leading_block_det(ctx.n))
}

/// `|R_{θ,n;m}|` by the three-term-plus-history recurrence on the leading
/// blocks, in sign-tracked log space.
pub fn logdet_recurrence(ctx: &ScalarContext, m: usize) -> Result<SignedLog> {
    if m < 1 || m > ctx.n {
        return Err(GridError::Domain(format!("block size {m} outside 1..={}", ctx.n)));
    }
    Ok(recurrence_all(ctx, m).pop().unwrap())
}

/// Leading block determinants `|R_1| … |R_m|`.
pub(crate) fn recurrence_all(ctx: &ScalarContext, m: usize) -> Vec<SignedLog> {
    let fam = TauFamily::new(ctx);
    let t1 = sl(fam.tau(-1));
    let tau: Vec<SignedLog> = (0..m.max(1) as i64).map(|k| sl(fam.tau(k))).collect();
    let mut t1_pow = vec![SignedLog::ONE; m.max(1)];
    for k in 1..t1_pow.len() {
        t1_pow[k] = t1_pow[k - 1] * t1;
    }
    // dets[q] = |R_q|, dets[0] = 1.
    let mut dets = vec![SignedLog::ONE; m + 1];
    for q in 2..=m {
        let e = q - 2;
        let mut terms = Vec::with_capacity(q);
        terms.push(SignedLog::parity(e as i64) * sl(fam.tau_star(e as i64)) * t1_pow[e]);
        for k in 0..q.saturating_sub(2) {
            terms.push(SignedLog::parity(k as i64) * tau[k] * dets[q - k - 1] * t1_pow[k]);
        }
        dets[q] = SignedLog::sum(terms);
    }
    dets.remove(0);
    dets
}
