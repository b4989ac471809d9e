//! Mode products on a d-way tensor stored in lexicographic order (first axis
//! slowest).

use nalgebra::DMatrix;
use rayon::prelude::*;

/// Work (in multiply-adds) below which a mode product stays on one thread.
const PAR_THRESHOLD: usize = 1 << 16;

/// `y = M ×_axis x`: multiplies every mode-`axis` fiber of `x` by `m`.
pub fn mode_product(x: &[f64], n: usize, d: usize, axis: usize, m: &DMatrix<f64>) -> Vec<f64> {
    assert!(axis < d);
    assert_eq!(m.shape(), (n, n));
    assert_eq!(x.len(), n.pow(d as u32));
    let post = n.pow((d - 1 - axis) as u32);
    let block = n * post;
    let mut y = vec![0.0; x.len()];
    let kernel = |(xb, yb): (&[f64], &mut [f64])| {
        for i in 0..n {
            let out = &mut yb[i * post..(i + 1) * post];
            for j in 0..n {
                let c = m[(i, j)];
                if c == 0.0 {
                    continue;
                }
                let src = &xb[j * post..(j + 1) * post];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += c * s;
                }
            }
        }
    };
    if x.len() * n < PAR_THRESHOLD {
        x.chunks(block).zip(y.chunks_mut(block)).for_each(kernel);
    } else {
        x.par_chunks(block).zip(y.par_chunks_mut(block)).for_each(kernel);
    }
    y
}

/// Applies `m_0 ⊗ … ⊗ m_{d-1}` by successive mode products in increasing
/// axis order.
pub fn kron_apply(x: &[f64], n: usize, mats: &[&DMatrix<f64>]) -> Vec<f64> {
    let d = mats.len();
    let mut cur = x.to_vec();
    for (axis, m) in mats.iter().enumerate() {
        cur = mode_product(&cur, n, d, axis, m);
    }
    cur
}
