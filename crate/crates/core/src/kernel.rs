//! Matérn-3/2 kernel, the one-axis correlation matrix and the separable
//! lattice covariance.
//!
//! The full covariance is `prefactor * (R_1 ⊗ … ⊗ R_d)` and is never formed
//! here; see [`crate::oracle`] for the dense expansion.

use crate::error::{GridError, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Scale `phi` and per-axis decay rates `thetas`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub phi: f64,
    pub thetas: Vec<f64>,
}

impl ModelParams {
    pub fn new(phi: f64, thetas: Vec<f64>) -> Result<Self> {
        if !(phi.is_finite() && phi > 0.0) {
            return Err(GridError::Domain(format!("phi must be positive and finite, got {phi}")));
        }
        if thetas.is_empty() {
            return Err(GridError::Domain("at least one decay rate is required".into()));
        }
        for (t, &th) in thetas.iter().enumerate() {
            if !(th.is_finite() && th > 0.0) {
                return Err(GridError::Domain(format!(
                    "theta[{t}] must be positive and finite, got {th}"
                )));
            }
        }
        Ok(Self { phi, thetas })
    }

    pub fn d(&self) -> usize {
        self.thetas.len()
    }
}

/// `n` points per axis on `d` axes: sites `(i_1/n, …, i_d/n)`, `1 <= i_t <= n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub d: usize,
}

impl GridSpec {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n < 2 {
            return Err(GridError::Domain(format!("n must be at least 2, got {n}")));
        }
        if d < 1 {
            return Err(GridError::Domain("d must be at least 1".into()));
        }
        let size = (n as u64)
            .checked_pow(d as u32)
            .filter(|&s| s <= (isize::MAX as u64) / 8)
            .ok_or_else(|| GridError::Infeasible(format!("{n}^{d}")))?;
        let _ = size;
        Ok(Self { n, d })
    }

    /// Number of lattice sites, `n^d`.
    pub fn size(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Multi-index (1-based) of the site at lexicographic position `k`.
    pub fn site(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.d];
        for t in (0..self.d).rev() {
            idx[t] = k % self.n + 1;
            k /= self.n;
        }
        idx
    }

    /// Lexicographic position of a 1-based multi-index.
    pub fn position(&self, site: &[usize]) -> Result<usize> {
        self.check_site(site)?;
        Ok(site.iter().fold(0, |acc, &i| acc * self.n + (i - 1)))
    }

    fn check_site(&self, site: &[usize]) -> Result<()> {
        if site.len() != self.d || site.iter().any(|&i| i < 1 || i > self.n) {
            return Err(GridError::Domain(format!(
                "site {site:?} is not on the {}^{} lattice",
                self.n, self.d
            )));
        }
        Ok(())
    }
}

/// Per-axis scalars: `w = theta / n`, `u = exp(-w)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarContext {
    pub theta: f64,
    pub n: usize,
    pub w: f64,
    pub u: f64,
}

impl ScalarContext {
    pub fn new(theta: f64, n: usize) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(GridError::Domain(format!("theta must be positive, got {theta}")));
        }
        if n < 2 {
            return Err(GridError::Domain(format!("n must be at least 2, got {n}")));
        }
        let w = theta / n as f64;
        Ok(Self {
            theta,
            n,
            w,
            u: (-w).exp(),
        })
    }

    /// Correlation at integer lag `k`: `(1 + k w) u^k`.
    pub fn lag(&self, k: usize) -> f64 {
        let kw = k as f64 * self.w;
        (1.0 + kw) * (-kw).exp()
    }
}

/// Dense `R_{θ,n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrMatrix(pub DMatrix<f64>);

impl CorrMatrix {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `(1 + θ s) e^{-θ s}`.
pub fn matern32_corr(s: f64, theta: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(GridError::Domain(format!("distance must be nonnegative, got {s}")));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(GridError::Domain(format!("theta must be positive, got {theta}")));
    }
    let x = theta * s;
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok((1.0 + x) * (-x).exp())
}

/// `π^d φ^d / (2^d ∏ θ_t³)`: the marginal variance.
pub fn variance_prefactor(params: &ModelParams) -> Result<f64> {
    let v = log_variance_prefactor(params).exp();
    if !v.is_finite() || v == 0.0 {
        return Err(GridError::NonFinite(format!("variance prefactor {v}")));
    }
    Ok(v)
}

pub fn log_variance_prefactor(params: &ModelParams) -> f64 {
    let d = params.d() as f64;
    d * (PI * params.phi / 2.0).ln() - 3.0 * params.thetas.iter().map(|t| t.ln()).sum::<f64>()
}

pub fn corr_matrix(ctx: &ScalarContext) -> CorrMatrix {
    let n = ctx.n;
    let lags: Vec<f64> = (0..n).map(|k| ctx.lag(k)).collect();
    CorrMatrix(DMatrix::from_fn(n, n, |i, j| lags[i.abs_diff(j)]))
}

/// Covariance between two lattice sites given as 1-based multi-indices.
pub fn covariance_entry(params: &ModelParams, grid: &GridSpec, site_a: &[usize], site_b: &[usize]) -> Result<f64> {
    if params.d() != grid.d {
        return Err(GridError::Dimension(format!(
            "{} decay rates for a {}-dimensional grid",
            params.d(),
            grid.d
        )));
    }
    grid.check_site(site_a)?;
    grid.check_site(site_b)?;
    let mut c = variance_prefactor(params)?;
    for t in 0..grid.d {
        let ctx = ScalarContext::new(params.thetas[t], grid.n)?;
        c *= ctx.lag(site_a[t].abs_diff(site_b[t]));
    }
    Ok(c)
}
