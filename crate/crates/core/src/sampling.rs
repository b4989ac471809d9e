//! Exact simulation of lattice fields through per-axis Cholesky factors.
//!
//! Normal variates come from a ChaCha20 stream (a counter-based generator)
//! seeded with `master_seed` and positioned on stream `stream_id`, mapped to
//! N(0,1) by the ziggurat transform of `rand_distr::StandardNormal`.

use crate::error::{GridError, Result};
use crate::kernel::{corr_matrix, variance_prefactor, GridSpec, ModelParams, ScalarContext};
use crate::likelihood::LatticeField;
use crate::tensor::kron_apply;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Largest field the sampler will allocate.
pub const SAMPLE_MAX_SIZE: usize = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeededStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeededStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    pub fn normals(&self, len: usize) -> Vec<f64> {
        let mut rng = self.rng();
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

/// Lower-triangular `L` with `L Lᵀ = R_{θ,n} (+ jitter I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisFactor {
    pub l: DMatrix<f64>,
    /// Diagonal shift added after a failed first attempt.
    pub jitter: Option<f64>,
}

pub fn axis_cholesky(ctx: &ScalarContext) -> Result<AxisFactor> {
    let r = corr_matrix(ctx).0;
    if let Some(c) = r.clone().cholesky() {
        return Ok(AxisFactor { l: c.l(), jitter: None });
    }
    let eps = 1e-12 * ctx.n as f64;
    let shifted = r + DMatrix::identity(ctx.n, ctx.n) * eps;
    match shifted.cholesky() {
        Some(c) => Ok(AxisFactor {
            l: c.l(),
            jitter: Some(eps),
        }),
        None => Err(GridError::Numerical(format!(
            "Cholesky failed for θ={}, n={} even with jitter {eps:e}",
            ctx.theta, ctx.n
        ))),
    }
}

/// Per-axis factors for one `(params, grid)`, reusable across replications.
#[derive(Clone, Debug)]
pub struct Sampler {
    pub grid: GridSpec,
    scale: f64,
    factors: Vec<AxisFactor>,
}

impl Sampler {
    pub fn new(params: &ModelParams, grid: GridSpec) -> Result<Self> {
        if params.d() != grid.d {
            return Err(GridError::Dimension("one decay rate per axis is required".into()));
        }
        if grid.size() > SAMPLE_MAX_SIZE {
            return Err(GridError::Infeasible(format!("{}^{} sites", grid.n, grid.d)));
        }
        let factors = params
            .thetas
            .iter()
            .map(|&t| axis_cholesky(&ScalarContext::new(t, grid.n)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            scale: variance_prefactor(params)?.sqrt(),
            factors,
        })
    }

    /// Jitter applied on each axis, if any.
    pub fn jitters(&self) -> Vec<Option<f64>> {
        self.factors.iter().map(|f| f.jitter).collect()
    }

    pub fn sample(&self, stream: SeededStream) -> LatticeField {
        let z = stream.normals(self.grid.size());
        let mats: Vec<&DMatrix<f64>> = self.factors.iter().map(|f| &f.l).collect();
        let mut x = kron_apply(&z, self.grid.n, &mats);
        for v in &mut x {
            *v *= self.scale;
        }
        LatticeField {
            grid: self.grid,
            values: x,
        }
    }
}

pub fn sample_field(params: &ModelParams, grid: GridSpec, stream: SeededStream) -> Result<LatticeField> {
    Ok(Sampler::new(params, grid)?.sample(stream))
}
