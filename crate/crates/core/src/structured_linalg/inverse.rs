use super::cofactor::{canonicalize, cofactor_recurrence};
use super::roots::AxisScalars;
use super::tau::Precision;
use crate::error::{GridError, Result};
use crate::kernel::ScalarContext;
use crate::signed_log::SignedLog;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Per-axis scalars plus `|R_{θ,n}|`, reused across inverse entries.
#[derive(Clone, Debug)]
pub struct ClosedForm {
    pub scalars: AxisScalars,
    pub logdet: SignedLog,
}

impl ClosedForm {
    pub fn new(ctx: &ScalarContext) -> Result<Self> {
        Self::with_precision(ctx, Precision::DoubleDouble)
    }

    pub fn with_precision(ctx: &ScalarContext, precision: Precision) -> Result<Self> {
        let scalars = AxisScalars::with_precision(ctx, precision)?;
        let logdet = scalars.leading_block_det(ctx.n);
        Ok(Self { scalars, logdet })
    }

    pub fn n(&self) -> usize {
        self.scalars.ctx.n
    }

    pub fn minor(&self, i: usize, j: usize) -> Result<SignedLog> {
        let (ci, cj) = canonicalize(self.n(), i, j)?;
        match self.scalars.minor_closed(ci, cj) {
            Some(v) => Ok(v),
            None => cofactor_recurrence(&self.scalars.ctx, ci, cj),
        }
    }

    pub fn inverse_entry(&self, i: usize, j: usize) -> Result<f64> {
        let (ci, cj) = canonicalize(self.n(), i, j)?;
        let shift = self.n() as i64 - 2;
        let ratio = match self.scalars.minor_scaled(ci, cj, shift) {
            Some(m) => m / self.scalars.leading_block_scaled(self.n(), shift),
            None => cofactor_recurrence(&self.scalars.ctx, ci, cj)? / self.logdet,
        };
        let v = (SignedLog::parity((i + j) as i64) * ratio).to_f64();
        if !v.is_finite() {
            return Err(GridError::NonFinite(format!("inverse entry ({i},{j})")));
        }
        Ok(v)
    }

    pub fn inverse_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        let rows: Vec<Vec<f64>> = (1..=n)
            .into_par_iter()
            .map(|i| (i..=n).map(|j| self.inverse_entry(i, j)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let mut out = DMatrix::zeros(n, n);
        for (r, row) in rows.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                let c = r + k;
                out[(r, c)] = v;
                out[(c, r)] = v;
            }
        }
        Ok(out)
    }
}

/// `(R_{θ,n}^{-1})_{i,j}`, 1-based.
pub fn inverse_entry(ctx: &ScalarContext, i: usize, j: usize) -> Result<f64> {
    ClosedForm::new(ctx)?.inverse_entry(i, j)
}

pub fn inverse_matrix(ctx: &ScalarContext) -> Result<DMatrix<f64>> {
    ClosedForm::new(ctx)?.inverse_matrix()
}
