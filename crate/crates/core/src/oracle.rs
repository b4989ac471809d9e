//! Brute-force dense references for validation.
//!
//! Nothing here uses the structured closed forms: determinants and solves
//! go through a partially pivoted LU on explicitly materialized matrices.

use crate::dd::{DoubleDouble, Scalar};
use crate::error::{GridError, Result};
use crate::kernel::{corr_matrix, variance_prefactor, ModelParams, ScalarContext};
use crate::likelihood::LatticeField;
use crate::signed_log::SignedLog;
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Largest `n^d` the dense Gaussian density will materialize.
pub const DENSE_MAX_SIZE: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(pub DMatrix<f64>);

impl From<DMatrix<f64>> for DenseMatrix {
    fn from(m: DMatrix<f64>) -> Self {
        Self(m)
    }
}

impl DenseMatrix {
    pub fn from_row_slice(m: usize, data: &[f64]) -> Self {
        Self(DMatrix::from_row_slice(m, m, data))
    }
}

/// Packed LU with row pivots; `perm_sign` is the permutation parity.
struct Lu {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
    perm_sign: i8,
}

fn lu(m: &DMatrix<f64>) -> Result<Lu> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(GridError::Dimension(format!("{}x{} is not square", n, m.ncols())));
    }
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1i8;
    for k in 0..n {
        let (p, piv) = (k..n)
            .map(|r| (r, a[(r, k)].abs()))
            .fold((k, -1.0), |best, x| if x.1 > best.1 { x } else { best });
        if piv == 0.0 {
            return Err(GridError::Singular);
        }
        if p != k {
            a.swap_rows(p, k);
            perm.swap(p, k);
            sign = -sign;
        }
        let d = a[(k, k)];
        for r in (k + 1)..n {
            let f = a[(r, k)] / d;
            a[(r, k)] = f;
            if f != 0.0 {
                for c in (k + 1)..n {
                    a[(r, c)] -= f * a[(k, c)];
                }
            }
        }
    }
    Ok(Lu {
        lu: a,
        perm,
        perm_sign: sign,
    })
}

impl Lu {
    fn logdet(&self) -> SignedLog {
        let mut acc = SignedLog::new(self.perm_sign, 0.0);
        for k in 0..self.lu.nrows() {
            acc = acc * SignedLog::from_f64(self.lu[(k, k)]);
        }
        acc
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.lu.nrows();
        let mut x = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.lu[(i, k)] * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }
}

pub fn dense_logdet(m: &DenseMatrix) -> Result<SignedLog> {
    Ok(lu(&m.0)?.logdet())
}

/// Determinant with row `i` and column `j` (1-based) removed.
pub fn dense_minor_det(m: &DenseMatrix, i: usize, j: usize) -> Result<SignedLog> {
    let n = m.0.nrows();
    if i < 1 || j < 1 || i > n || j > n {
        return Err(GridError::Index { i, j, n });
    }
    if n == 1 {
        return Ok(SignedLog::ONE);
    }
    let sub = m.0.clone().remove_row(i - 1).remove_column(j - 1);
    dense_logdet(&DenseMatrix(sub))
}

pub fn dense_inverse(m: &DenseMatrix) -> Result<DMatrix<f64>> {
    let f = lu(&m.0)?;
    let n = m.0.nrows();
    let mut out = DMatrix::zeros(n, n);
    for c in 0..n {
        let e = DVector::from_fn(n, |i, _| if i == c { 1.0 } else { 0.0 });
        out.set_column(c, &f.solve(&e));
    }
    Ok(out)
}

pub fn dense_solve(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let f = lu(&m.0)?;
    Ok(f.solve(&DVector::from_column_slice(b)).as_slice().to_vec())
}

/// `R_{θ,n}` with entries formed in double-double from `ctx.w`.
fn corr_matrix_wide(ctx: &ScalarContext) -> Vec<Vec<DoubleDouble>> {
    let w = DoubleDouble::from_f64(ctx.w);
    let lag: Vec<DoubleDouble> = (0..ctx.n)
        .map(|k| {
            let kw = DoubleDouble::from_f64(k as f64) * w;
            (DoubleDouble::one() + kw) * (-kw).exp()
        })
        .collect();
    (0..ctx.n)
        .map(|i| (0..ctx.n).map(|j| lag[i.abs_diff(j)]).collect())
        .collect()
}

/// Determinant by partially pivoted elimination in double-double.
fn logdet_wide(mut a: Vec<Vec<DoubleDouble>>) -> Result<SignedLog> {
    let n = a.len();
    let mut acc = SignedLog::ONE;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| a[x][k].to_f64().abs().total_cmp(&a[y][k].to_f64().abs()))
            .unwrap();
        if a[p][k].to_f64() == 0.0 {
            return Err(GridError::Singular);
        }
        if p != k {
            a.swap(p, k);
            acc = -acc;
        }
        let d = a[k][k];
        for r in (k + 1)..n {
            let f = a[r][k] / d;
            for c in (k + 1)..n {
                let v = a[k][c];
                a[r][c] = a[r][c] - f * v;
            }
        }
        let sign = if d.to_f64() < 0.0 { -1 } else { 1 };
        acc = acc * SignedLog::new(sign, d.abs().ln().to_f64());
    }
    Ok(acc)
}

/// Minor of `R_{θ,n}` built and eliminated in double-double. Corner minors
/// are so small that rounding the entries to f64 alone moves them by far
/// more than 1e−8 relative, so the f64 route cannot serve as a reference.
pub fn corr_minor_det_wide(ctx: &ScalarContext, i: usize, j: usize) -> Result<SignedLog> {
    let n = ctx.n;
    if i < 1 || j < 1 || i > n || j > n {
        return Err(GridError::Index { i, j, n });
    }
    let sub = corr_matrix_wide(ctx)
        .into_iter()
        .enumerate()
        .filter(|&(r, _)| r != i - 1)
        .map(|(_, row)| {
            row.into_iter()
                .enumerate()
                .filter(|&(c, _)| c != j - 1)
                .map(|(_, v)| v)
                .collect()
        })
        .collect();
    logdet_wide(sub)
}

/// `R_{θ,n}^{-1}` by Gauss-Jordan elimination in double-double, rounded to
/// f64 at the end. The f64 LU inverse loses the small entries to
/// conditioning, so this is the reference for entrywise comparisons.
pub fn corr_inverse_wide(ctx: &ScalarContext) -> Result<DMatrix<f64>> {
    let n = ctx.n;
    let mut a = corr_matrix_wide(ctx);
    let zero = DoubleDouble::zero();
    let one = DoubleDouble::one();
    let mut inv: Vec<Vec<DoubleDouble>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { one } else { zero }).collect())
        .collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| a[x][k].to_f64().abs().total_cmp(&a[y][k].to_f64().abs()))
            .unwrap();
        if a[p][k].to_f64() == 0.0 {
            return Err(GridError::Singular);
        }
        a.swap(p, k);
        inv.swap(p, k);
        let d = a[k][k];
        for c in 0..n {
            a[k][c] = a[k][c] / d;
            inv[k][c] = inv[k][c] / d;
        }
        for r in 0..n {
            if r == k {
                continue;
            }
            let f = a[r][k];
            for c in 0..n {
                let (x, y) = (a[k][c], inv[k][c]);
                a[r][c] = a[r][c] - f * x;
                inv[r][c] = inv[r][c] - f * y;
            }
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| inv[i][j].to_f64()))
}

pub fn corr_logdet_wide(ctx: &ScalarContext) -> Result<SignedLog> {
    logdet_wide(corr_matrix_wide(ctx))
}

/// Explicit Kronecker product `a ⊗ b`.
pub fn kronecker(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    DMatrix::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

/// Fully materialized lattice covariance `prefactor * (R_1 ⊗ … ⊗ R_d)`.
pub fn dense_covariance(params: &ModelParams, n: usize) -> Result<DMatrix<f64>> {
    let size = n
        .checked_pow(params.d() as u32)
        .filter(|&s| s <= DENSE_MAX_SIZE)
        .ok_or_else(|| GridError::Infeasible(format!("dense covariance for {n}^{}", params.d())))?;
    let _ = size;
    let mut k = DMatrix::from_element(1, 1, variance_prefactor(params)?);
    for &th in &params.thetas {
        k = kronecker(&k, &corr_matrix(&ScalarContext::new(th, n)?).0);
    }
    Ok(k)
}

/// Gaussian log-density of the field under the dense covariance.
pub fn dense_mvn_logdensity(field: &LatticeField, params: &ModelParams) -> Result<f64> {
    if field.grid.d != params.d() {
        return Err(GridError::Dimension("field and parameter dimensions differ".into()));
    }
    let sigma = dense_covariance(params, field.grid.n)?;
    let f = lu(&sigma)?;
    let x = DVector::from_column_slice(&field.values);
    let q = x.dot(&f.solve(&x));
    let ld = f.logdet();
    let m = x.len() as f64;
    Ok(-0.5 * m * (2.0 * PI).ln() - 0.5 * ld.log_mag - 0.5 * q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::GridSpec;

    #[test]
    fn wide_routes_agree_with_f64_when_well_conditioned() {
        let c = ScalarContext::new(3.0, 6).unwrap();
        let m = DenseMatrix(corr_matrix(&c).0);
        let a = dense_logdet(&m).unwrap();
        let b = corr_logdet_wide(&c).unwrap();
        assert!((a.log_mag - b.log_mag).abs() < 1e-12);
        let (x, y) = (
            dense_minor_det(&m, 2, 5).unwrap(),
            corr_minor_det_wide(&c, 2, 5).unwrap(),
        );
        assert_eq!(x.sign, y.sign);
        assert!((x.log_mag - y.log_mag).abs() < 1e-10);
        let diff = (dense_inverse(&m).unwrap() - corr_inverse_wide(&c).unwrap()).amax();
        assert!(diff < 1e-10);
    }

    #[test]
    fn wide_two_by_two() {
        let c = ScalarContext::new(1.0, 2).unwrap();
        let rho = 1.5 * (-0.5f64).exp();
        let inv = corr_inverse_wide(&c).unwrap();
        assert!((inv[(0, 1)] + rho / (1.0 - rho * rho)).abs() < 1e-13);
        assert!((corr_logdet_wide(&c).unwrap().log_mag - (1.0 - rho * rho).ln()).abs() < 1e-14);
    }

    #[test]
    fn identity_and_diagonal() {
        let id = DenseMatrix(DMatrix::identity(4, 4));
        assert_eq!(dense_logdet(&id).unwrap(), SignedLog::ONE);
        let d = DenseMatrix::from_row_slice(2, &[2.0, 0.0, 0.0, 3.0]);
        let v = dense_logdet(&d).unwrap();
        assert_eq!(v.sign, 1);
        assert!((v.log_mag - 6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn permutation_sign() {
        let m = DenseMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(dense_logdet(&m).unwrap().sign, -1);
        let s = DenseMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(dense_logdet(&s), Err(GridError::Singular));
    }

    #[test]
    fn minors_of_two_by_two() {
        let m = DenseMatrix::from_row_slice(2, &[1.0, 2.0, 3.0, 4.0]);
        assert!((dense_minor_det(&m, 1, 1).unwrap().to_f64() - 4.0).abs() < 1e-15);
        assert!((dense_minor_det(&m, 1, 2).unwrap().to_f64() - 3.0).abs() < 1e-15);
        assert!(dense_minor_det(&m, 3, 1).is_err());
    }

    #[test]
    fn inverse_and_solve() {
        let m = DenseMatrix::from_row_slice(3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let inv = dense_inverse(&m).unwrap();
        assert!((&inv * &m.0 - DMatrix::<f64>::identity(3, 3)).amax() < 1e-14);
        let x = dense_solve(&m, &[1.0, 2.0, 3.0]).unwrap();
        let back = &m.0 * DVector::from_column_slice(&x);
        assert!((back[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn kronecker_shape_and_entries() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 6.0, 7.0]);
        let k = kronecker(&a, &b);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(1, 3)], 2.0 * 7.0);
        assert_eq!(k[(2, 1)], 3.0 * 5.0);
    }

    #[test]
    fn zero_field_density() {
        let p = ModelParams::new(0.8, vec![1.0, 2.0]).unwrap();
        let g = GridSpec::new(3, 2).unwrap();
        let f = LatticeField::new(g, vec![0.0; 9]).unwrap();
        let sigma = dense_covariance(&p, 3).unwrap();
        let ld = dense_logdet(&DenseMatrix(sigma)).unwrap().log_mag;
        let v = dense_mvn_logdensity(&f, &p).unwrap();
        assert!((v - (-4.5 * (2.0 * PI).ln() - 0.5 * ld)).abs() < 1e-12);
    }

    #[test]
    fn infeasible_dense_size() {
        let p = ModelParams::new(1.0, vec![1.0; 3]).unwrap();
        assert!(dense_covariance(&p, 17).is_err());
    }
}
