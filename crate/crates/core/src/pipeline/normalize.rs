use serde::{Deserialize, Serialize};

use crate::numkit::DenseMatrix;
use crate::{Error, Result};

/// Per-mode affine scaling `(α − mean) / std`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Spread, relative to the most active mode, below which a mode is left unscaled.
pub const DORMANT_RATIO: f64 = 1e-2;

impl Normalizer {
    pub fn identity(r: usize) -> Self {
        Self { mean: vec![0.0; r], std: vec![1.0; r] }
    }

    /// Statistics over all rows of the given blocks.
    pub fn fit(blocks: &[&DenseMatrix]) -> Result<Self> {
        let r = blocks.first().map(|b| b.cols()).ok_or_else(|| Error::InsufficientData("no rows to normalize".into()))?;
        if blocks.iter().any(|b| b.cols() != r) {
            return Err(Error::Shape("normalizer blocks differ in width".into()));
        }
        let n: usize = blocks.iter().map(|b| b.rows()).sum();
        if n == 0 {
            return Err(Error::InsufficientData("no rows to normalize".into()));
        }
        let mut mean = vec![0.0; r];
        for b in blocks {
            for i in 0..b.rows() {
                mean.iter_mut().zip(b.row(i)).for_each(|(m, v)| *m += v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; r];
        for b in blocks {
            for i in 0..b.rows() {
                for (j, v) in b.row(i).iter().enumerate() {
                    var[j] += (v - mean[j]).powi(2);
                }
            }
        }
        let raw: Vec<f64> = var.iter().map(|v| (v / n as f64).sqrt()).collect();
        let top = raw.iter().copied().fold(0.0, f64::max);
        // modes that barely move over the fitted rows (dormant during a
        // transient, or pure round-off) keep unit scale: dividing by their
        // tiny spread would blow up whatever they do later
        let std = raw.iter().map(|&s| if s > DORMANT_RATIO * top && s > 0.0 { s } else { 1.0 }).collect();
        Ok(Self { mean, std })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, m: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| (m[(i, j)] - self.mean[j]) / self.std[j])
    }

    pub fn invert(&self, m: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] * self.std[j] + self.mean[j])
    }
}
