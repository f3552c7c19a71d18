use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::snapshot::{Field, SnapshotSet, Source};
use crate::numkit::DenseMatrix;
use crate::{Error, Result};

/// Parameters for the quasi-periodic vortex-street surrogate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticVksConfig {
    /// Total degrees of freedom per snapshot (split evenly into `u_x | u_y`).
    pub n_dof: usize,
    pub n_t: usize,
    /// Angular frequencies in radians per snapshot.
    pub frequencies: Vec<f64>,
    pub transient_len: usize,
}

impl Default for SyntheticVksConfig {
    fn default() -> Self {
        let base = 2.0 * PI / 25.0;
        Self { n_dof: 256, n_t: 400, frequencies: vec![base, base * 2f64.sqrt()], transient_len: 100 }
    }
}

/// Traveling-wave surrogate for vortex-shedding data.
///
/// Frequency `k` drives a wave with integer wavenumber `k + 1` on a periodic
/// grid, so different frequencies live in orthogonal spatial subspaces and
/// each contributes exactly rank two. During the first `transient_len`
/// snapshots the wave phase is frozen while its amplitude ramps up smoothly;
/// afterwards the amplitude is constant and the phase advances.
pub fn synthetic_vks(cfg: &SyntheticVksConfig) -> Result<SnapshotSet> {
    if cfg.n_dof < 2 || cfg.n_dof % 2 != 0 {
        return Err(Error::Config(format!("n_dof must be even and positive, got {}", cfg.n_dof)));
    }
    if cfg.n_t <= cfg.transient_len || cfg.n_t < 2 {
        return Err(Error::Config(format!("n_t = {} must exceed transient_len = {}", cfg.n_t, cfg.transient_len)));
    }
    let n = cfg.n_dof / 2;
    if 2 * (cfg.frequencies.len() + 1) > n {
        return Err(Error::Config("grid too coarse for the requested number of frequencies".into()));
    }
    let transient = cfg.transient_len as f64;
    let mut data = DenseMatrix::zeros(cfg.n_t, cfg.n_dof);
    for step in 0..cfg.n_t {
        let t = step as f64;
        let (amp, frozen) = if step < cfg.transient_len {
            let s = t / transient;
            (s * s * (3.0 - 2.0 * s), true)
        } else {
            (1.0, false)
        };
        let row = data.row_mut(step);
        for (k, &omega) in cfg.frequencies.iter().enumerate() {
            let q = (k + 1) as f64;
            let weight = amp / (k + 1) as f64;
            let phase = if frozen { 0.0 } else { omega * (t - transient) };
            for j in 0..n {
                let x = 2.0 * PI * j as f64 / n as f64;
                row[j] += weight * (q * x - phase).cos();
                row[n + j] += 0.5 * weight * (q * x - phase).sin();
            }
        }
    }
    let times = (0..cfg.n_t).map(|k| k as f64).collect();
    SnapshotSet::new(times, data, vec![Field::new("u_x", n), Field::new("u_y", n)], Source::Synthetic)
}
