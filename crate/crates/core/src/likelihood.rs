//! Exact Gaussian log-likelihood through the Kronecker structure, and the
//! Fisher information for `(φ, θ_1, …, θ_d)`.

use crate::asymptotics::corr_matrix_derivatives;
use crate::cache::InverseCache;
use crate::error::{GridError, Result};
use crate::kernel::{GridSpec, ModelParams, ScalarContext};
use crate::structured_linalg::inverse_matrix;
use crate::tensor::kron_apply;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Observations at the `n^d` lattice sites, first axis varying slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl LatticeField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(GridError::Dimension(format!(
                "{} values for a {}^{} grid",
                values.len(),
                grid.n,
                grid.d
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            values: vec![0.0; grid.size()],
            grid,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Reorders axes so that new axis `t` is old axis `perm[t]`.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self> {
        let d = self.grid.d;
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return Err(GridError::Dimension(format!("{perm:?} is not a permutation of 0..{d}")));
        }
        let mut out = vec![0.0; self.values.len()];
        for (k, v) in self.values.iter().enumerate() {
            let old = self.grid.site(k);
            let new: Vec<usize> = perm.iter().map(|&p| old[p]).collect();
            out[self.grid.position(&new)?] = *v;
        }
        Ok(Self {
            grid: self.grid,
            values: out,
        })
    }
}

/// `(d+1) × (d+1)` information matrix; index 0 is `φ`, `t` is `θ_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherMatrix(pub DMatrix<f64>);

impl FisherMatrix {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.0[(a, b)]
    }
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// Components of one likelihood evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoglikParts {
    pub loglik: f64,
    /// `log |Σ|`.
    pub log_det_sigma: f64,
    /// `X' (⊗ R_t)^{-1} X`, without the variance prefactor.
    pub quad_form: f64,
}

fn check_dims(field: &LatticeField, params: &ModelParams) -> Result<()> {
    if field.grid.d != params.d() {
        return Err(GridError::Dimension(format!(
            "field has {} axes but {} decay rates were given",
            field.grid.d,
            params.d()
        )));
    }
    Ok(())
}

/// `X' (⊗_t R_{θ_t,n})^{-1} X` using per-axis inverses from `cache`.
pub fn quad_form_cached(field: &LatticeField, thetas: &[f64], cache: &InverseCache) -> Result<f64> {
    let n = field.grid.n;
    if thetas.len() != field.grid.d {
        return Err(GridError::Dimension("one decay rate per axis is required".into()));
    }
    let invs = thetas.iter().map(|&t| cache.get(t, n)).collect::<Result<Vec<_>>>()?;
    let mats: Vec<&DMatrix<f64>> = invs.iter().map(|a| &a.inverse).collect();
    let y = kron_apply(&field.values, n, &mats);
    Ok(field.values.iter().zip(&y).map(|(a, b)| a * b).sum())
}

pub fn quad_form(field: &LatticeField, params: &ModelParams) -> Result<f64> {
    check_dims(field, params)?;
    quad_form_cached(field, &params.thetas, InverseCache::global())
}

/// Assembles the log-likelihood from the quadratic form and per-axis
/// log-determinants.
pub(crate) fn assemble(n: usize, params: &ModelParams, axis_logdets: &[f64], q: f64) -> Result<LoglikParts> {
    let d = params.d() as f64;
    let nn = n as f64;
    let big_n = nn.powf(d);
    let sum_log_theta: f64 = params.thetas.iter().map(|t| t.ln()).sum();
    let log_prefactor = d * (PI * params.phi / 2.0).ln() - 3.0 * sum_log_theta;
    let log_det_sigma = big_n * log_prefactor + nn.powf(d - 1.0) * axis_logdets.iter().sum::<f64>();
    let two_ll = -big_n * (2.0 * PI).ln() - log_det_sigma - (-log_prefactor).exp() * q;
    let loglik = 0.5 * two_ll;
    if !loglik.is_finite() {
        return Err(GridError::NonFinite(format!("log-likelihood {loglik}")));
    }
    Ok(LoglikParts {
        loglik,
        log_det_sigma,
        quad_form: q,
    })
}

pub fn loglik_parts_cached(field: &LatticeField, params: &ModelParams, cache: &InverseCache) -> Result<LoglikParts> {
    check_dims(field, params)?;
    let n = field.grid.n;
    let invs = params
        .thetas
        .iter()
        .map(|&t| cache.get(t, n))
        .collect::<Result<Vec<_>>>()?;
    let mats: Vec<&DMatrix<f64>> = invs.iter().map(|a| &a.inverse).collect();
    let y = kron_apply(&field.values, n, &mats);
    let q = field.values.iter().zip(&y).map(|(a, b)| a * b).sum();
    let lds: Vec<f64> = invs.iter().map(|a| a.logdet).collect();
    assemble(n, params, &lds, q)
}

pub fn loglik_parts(field: &LatticeField, params: &ModelParams) -> Result<LoglikParts> {
    loglik_parts_cached(field, params, InverseCache::global())
}

pub fn loglik(field: &LatticeField, params: &ModelParams) -> Result<f64> {
    Ok(loglik_parts(field, params)?.loglik)
}

/// Leading-order information matrix.
pub fn fisher_asymptotic(params: &ModelParams, n: usize) -> Result<FisherMatrix> {
    if n < 2 {
        return Err(GridError::Domain("n must be at least 2".into()));
    }
    let d = params.d();
    let (df, nf, phi) = (d as f64, n as f64, params.phi);
    let mut m = DMatrix::zeros(d + 1, d + 1);
    m[(0, 0)] = df * df * nf.powf(df) / (2.0 * phi * phi);
    for (t, &th) in params.thetas.iter().enumerate() {
        m[(t + 1, t + 1)] = nf.powf(df - 1.0) * (2.0 * th + 5.0) / (th * th);
        let c = -df * nf.powf(df - 1.0) * (th + 2.0) / (phi * th);
        m[(0, t + 1)] = c;
        m[(t + 1, 0)] = c;
    }
    Ok(FisherMatrix(m))
}

/// Largest `n` accepted by [`fisher_trace_exact`].
pub const FISHER_EXACT_MAX_N: usize = 256;

/// Finite-`n` information from exact traces of `A_t = R_t^{-1} ∂R_t/∂θ_t`.
pub fn fisher_trace_exact(params: &ModelParams, n: usize) -> Result<FisherMatrix> {
    if !(2..=FISHER_EXACT_MAX_N).contains(&n) {
        return Err(GridError::Infeasible(format!(
            "exact traces need 2 <= n <= {FISHER_EXACT_MAX_N}, got {n}"
        )));
    }
    let d = params.d();
    let (df, nf, phi) = (d as f64, n as f64, params.phi);
    let big_n = nf.powf(df);
    let mut tr = Vec::with_capacity(d);
    let mut tr2 = Vec::with_capacity(d);
    for &th in &params.thetas {
        let ctx = ScalarContext::new(th, n)?;
        let a = inverse_matrix(&ctx)? * corr_matrix_derivatives(&ctx, 1)?;
        tr.push(a.trace());
        tr2.push((&a * &a).trace());
    }
    let c: Vec<f64> = params.thetas.iter().zip(&tr).map(|(th, t)| t - 3.0 * nf / th).collect();
    let mut m = DMatrix::zeros(d + 1, d + 1);
    m[(0, 0)] = df * df * big_n / (2.0 * phi * phi);
    for t in 0..d {
        let th = params.thetas[t];
        let pt = 0.5 * (df / phi) * nf.powf(df - 1.0) * c[t];
        m[(0, t + 1)] = pt;
        m[(t + 1, 0)] = pt;
        m[(t + 1, t + 1)] =
            0.5 * (9.0 * big_n / (th * th) - (6.0 / th) * nf.powf(df - 1.0) * tr[t] + nf.powf(df - 1.0) * tr2[t]);
        for s in 0..t {
            let v = 0.5 * nf.powf(df - 2.0) * c[s] * c[t];
            m[(s + 1, t + 1)] = v;
            m[(t + 1, s + 1)] = v;
        }
    }
    Ok(FisherMatrix(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::corr_matrix;
    use crate::oracle::dense_logdet;
    use crate::oracle::{dense_covariance, dense_mvn_logdensity, dense_solve, DenseMatrix};
    use proptest::prelude::*;

    fn field(n: usize, d: usize, seed: f64) -> LatticeField {
        let g = GridSpec::new(n, d).unwrap();
        let v = (0..g.size()).map(|k| ((k as f64 + 1.0) * seed).sin() * 1.7).collect();
        LatticeField::new(g, v).unwrap()
    }

    #[test]
    fn zero_field() {
        let p = ModelParams::new(1.3, vec![0.8, 2.0]).unwrap();
        let f = LatticeField::zeros(GridSpec::new(5, 2).unwrap());
        assert_eq!(quad_form(&f, &p).unwrap(), 0.0);
        let parts = loglik_parts(&f, &p).unwrap();
        let sigma = dense_covariance(&p, 5).unwrap();
        let ld = dense_logdet(&DenseMatrix(sigma)).unwrap().log_mag;
        assert!((parts.log_det_sigma - ld).abs() < 1e-9 * ld.abs());
        assert!((parts.loglik - (-12.5 * (2.0 * PI).ln() - 0.5 * ld)).abs() < 1e-8);
    }

    #[test]
    fn quad_form_one_axis_matches_dense_solve() {
        let p = ModelParams::new(1.0, vec![1.3]).unwrap();
        let f = field(9, 1, 0.71);
        let r = corr_matrix(&ScalarContext::new(1.3, 9).unwrap()).0;
        let x = dense_solve(&DenseMatrix(r), &f.values).unwrap();
        let q: f64 = x.iter().zip(&f.values).map(|(a, b)| a * b).sum();
        assert!((quad_form(&f, &p).unwrap() / q - 1.0).abs() < 1e-8);
    }

    #[test]
    fn quad_form_two_axes_matches_kronecker() {
        let p = ModelParams::new(1.0, vec![0.6, 2.5]).unwrap();
        let f = field(4, 2, 1.37);
        let r0 = corr_matrix(&ScalarContext::new(0.6, 4).unwrap()).0;
        let r1 = corr_matrix(&ScalarContext::new(2.5, 4).unwrap()).0;
        let k = crate::oracle::kronecker(&r0, &r1);
        let x = dense_solve(&DenseMatrix(k), &f.values).unwrap();
        let q: f64 = x.iter().zip(&f.values).map(|(a, b)| a * b).sum();
        assert!((quad_form(&f, &p).unwrap() / q - 1.0).abs() < 1e-8);
    }

    #[test]
    fn loglik_matches_dense_density() {
        let p = ModelParams::new(1.0, vec![1.0]).unwrap();
        let f = field(6, 1, 0.3);
        assert!((loglik(&f, &p).unwrap() - dense_mvn_logdensity(&f, &p).unwrap()).abs() < 1e-8);
        let p = ModelParams::new(0.7, vec![1.5, 0.4]).unwrap();
        let f = field(4, 2, 0.9);
        let (a, b) = (loglik(&f, &p).unwrap(), dense_mvn_logdensity(&f, &p).unwrap());
        assert!((a - b).abs() < 1e-9 * b.abs());
    }

    #[test]
    fn dimension_mismatch() {
        let p = ModelParams::new(1.0, vec![1.0]).unwrap();
        assert!(loglik(&field(4, 2, 0.2), &p).is_err());
        assert!(LatticeField::new(GridSpec::new(3, 2).unwrap(), vec![0.0; 8]).is_err());
    }

    #[test]
    fn axis_permutation_invariance() {
        let f = field(5, 3, 0.77);
        let p = ModelParams::new(1.2, vec![0.5, 1.0, 3.0]).unwrap();
        let g = f.permute_axes(&[2, 0, 1]).unwrap();
        let q = ModelParams::new(1.2, vec![3.0, 0.5, 1.0]).unwrap();
        let (a, b) = (loglik(&f, &p).unwrap(), loglik(&g, &q).unwrap());
        assert!((a - b).abs() < 1e-9 * a.abs());
    }

    #[test]
    fn fisher_asymptotic_values() {
        let f = fisher_asymptotic(&ModelParams::new(2.0, vec![1.0, 1.0]).unwrap(), 10).unwrap();
        assert!((f.get(0, 0) - 50.0).abs() < 1e-12);
        assert!((f.get(0, 1) + 30.0).abs() < 1e-12);
        assert_eq!(f.get(1, 2), 0.0);
        let f = fisher_asymptotic(&ModelParams::new(1.0, vec![1.0; 3]).unwrap(), 10).unwrap();
        assert!((f.get(2, 2) - 700.0).abs() < 1e-10);
    }

    #[test]
    fn fisher_exact_scale_entry_and_symmetry() {
        for n in [4, 9, 20] {
            let f = fisher_trace_exact(&ModelParams::new(1.7, vec![0.9]).unwrap(), n).unwrap();
            assert_eq!(f.get(0, 0), n as f64 / (2.0 * 1.7 * 1.7));
        }
        let f = fisher_trace_exact(&ModelParams::new(1.0, vec![0.5, 1.0, 2.0]).unwrap(), 12).unwrap();
        assert_eq!(f.0, f.0.transpose());
        assert!(fisher_trace_exact(&ModelParams::new(1.0, vec![1.0]).unwrap(), 300).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn quad_form_is_quadratic(c in -5.0f64..5.0, seed in 0.1f64..3.0) {
            let p = ModelParams::new(1.0, vec![0.9, 1.8]).unwrap();
            let f = field(6, 2, seed);
            let q = quad_form(&f, &p).unwrap();
            let qc = quad_form(&f.scaled(c), &p).unwrap();
            prop_assert!((qc - c * c * q).abs() <= 1e-10 * q.max(1e-300) * c * c + 1e-300);
            prop_assert!(q >= 0.0);
        }
    }
}
