//! Tensor sampling grids used as the evidence set for pointwise checks.

use serde::{Deserialize, Serialize};

/// `n` points per axis on `[lo, hi]^m`.
///
/// With `offset` set, points sit at cell midpoints `lo + (k + ½)h`,
/// `h = (hi − lo)/n`, which keeps them off kinks placed on grid nodes
/// (e.g. `|x − x0|` with `x0` a node).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    #[serde(default)]
    pub offset: bool,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        GridSpec {
            lo,
            hi,
            n,
            offset: false,
        }
    }

    pub fn with_offset(mut self) -> Self {
        self.offset = true;
        self
    }

    pub fn axis(&self) -> Vec<f64> {
        let n = self.n;
        if self.offset {
            let h = (self.hi - self.lo) / n as f64;
            (0..n).map(|k| self.lo + (k as f64 + 0.5) * h).collect()
        } else if n == 1 {
            vec![0.5 * (self.lo + self.hi)]
        } else {
            let h = (self.hi - self.lo) / (n - 1) as f64;
            (0..n)
                .map(|k| if k == n - 1 { self.hi } else { self.lo + k as f64 * h })
                .collect()
        }
    }

    /// All tensor points in `m` dimensions, first coordinate fastest.
    pub fn points(&self, m: usize) -> Vec<Vec<f64>> {
        let axis = self.axis();
        let total = axis.len().pow(m as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; m];
        for _ in 0..total {
            out.push(idx.iter().map(|&k| axis[k]).collect());
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < axis.len() {
                    break;
                }
                *slot = 0;
            }
        }
        out
    }
}
