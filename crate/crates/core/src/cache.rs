//! Bounded per-axis cache of `R_{θ,n}^{-1}` and `log |R_{θ,n}|`.

use crate::error::Result;
use crate::kernel::ScalarContext;
use crate::structured_linalg::ClosedForm;
use nalgebra::DMatrix;
use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

pub const DEFAULT_CAPACITY: usize = 256;

#[derive(Debug)]
pub struct AxisInverse {
    pub theta: f64,
    pub n: usize,
    pub inverse: DMatrix<f64>,
    pub logdet: f64,
}

impl AxisInverse {
    pub fn compute(theta: f64, n: usize) -> Result<Self> {
        let cf = ClosedForm::new(&ScalarContext::new(theta, n)?)?;
        Ok(Self {
            theta,
            n,
            inverse: cf.inverse_matrix()?,
            logdet: cf.logdet.log_mag,
        })
    }
}

type Key = (u64, usize);
type Slot = Arc<OnceLock<Result<Arc<AxisInverse>>>>;

/// Get-or-compute cache keyed by `(θ bits, n)`. Concurrent requests for one
/// key share a single computation; the oldest keys are evicted first.
pub struct InverseCache {
    capacity: usize,
    inner: Mutex<(HashMap<Key, Slot>, VecDeque<Key>)>,
}

impl InverseCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            inner: Mutex::new((HashMap::new(), VecDeque::new())),
        }
    }

    pub fn global() -> &'static InverseCache {
        static CACHE: OnceLock<InverseCache> = OnceLock::new();
        CACHE.get_or_init(|| InverseCache::new(DEFAULT_CAPACITY))
    }

    pub fn get(&self, theta: f64, n: usize) -> Result<Arc<AxisInverse>> {
        let key = (theta.to_bits(), n);
        let slot = {
            let mut guard = self.inner.lock().unwrap_or_else(|e| e.into_inner());
            let (map, order) = &mut *guard;
            if let Some(s) = map.get(&key) {
                s.clone()
            } else {
                while map.len() >= self.capacity {
                    match order.pop_front() {
                        Some(old) => {
                            map.remove(&old);
                        }
                        None => break,
                    }
                }
                let s: Slot = Arc::new(OnceLock::new());
                map.insert(key, s.clone());
                order.push_back(key);
                s
            }
        };
        slot.get_or_init(|| AxisInverse::compute(theta, n).map(Arc::new))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        let mut g = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        g.0.clear();
        g.1.clear();
    }
}
