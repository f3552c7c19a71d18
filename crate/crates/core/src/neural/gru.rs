use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{fresh_version, init_uniform, sigmoid};
use crate::{Error, Result};

/// GRU cell with gate order reset, update, candidate:
///
/// ```text
/// r  = σ(W_ir x + b_ir + W_hr h + b_hr)
/// z  = σ(W_iz x + b_iz + W_hz h + b_hz)
/// n  = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
/// h' = (1 − z) ⊙ n + z ⊙ h
/// ```
///
/// Flat layout: `W_i (3H × I)`, `W_h (3H × H)`, `b_i (3H)`, `b_h (3H)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GruParams {
    input: usize,
    hidden: usize,
    params: Vec<f64>,
    #[serde(skip, default = "fresh_version")]
    version: u64,
}

impl PartialEq for GruParams {
    fn eq(&self, other: &Self) -> bool {
        self.input == other.input && self.hidden == other.hidden && self.params == other.params
    }
}

#[derive(Clone, Debug)]
pub struct GruTape {
    version: u64,
    x: Vec<f64>,
    h: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    /// `W_hn h + b_hn`
    hn: Vec<f64>,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::Shape(format!("GRU widths must be positive, got {input}/{hidden}")));
        }
        let n = 3 * hidden * (input + hidden + 2);
        Ok(Self { input, hidden, params: vec![0.0; n], version: fresh_version() })
    }

    /// Uniform initialization in `±1/sqrt(hidden)`.
    pub fn random<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let mut g = Self::zeros(input, hidden)?;
        init_uniform(rng, hidden, &mut g.params);
        Ok(g)
    }

    pub fn input_width(&self) -> usize {
        self.input
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version = fresh_version();
        &mut self.params
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::Shape(format!("{} parameters for a GRU with {}", values.len(), self.params.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("GRU parameters".into()));
        }
        self.params_mut().copy_from_slice(values);
        Ok(())
    }

    fn layout(&self) -> (usize, usize, usize, usize) {
        let (i, h) = (self.input, self.hidden);
        let wi = 0;
        let wh = wi + 3 * h * i;
        let bi = wh + 3 * h * h;
        let bh = bi + 3 * h;
        (wi, wh, bi, bh)
    }

    /// Pre-activations `W x + b` for all three gates.
    fn affine(&self, w_off: usize, b_off: usize, width: usize, v: &[f64]) -> Vec<f64> {
        let p = &self.params;
        (0..3 * self.hidden)
            .map(|g| p[b_off + g] + p[w_off + g * width..w_off + (g + 1) * width].iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn step(&self, h: &[f64], x: &[f64]) -> Result<(Vec<f64>, GruTape)> {
        if h.len() != self.hidden || x.len() != self.input {
            return Err(Error::Shape(format!(
                "GRU step with h of width {} and x of width {} (expected {} and {})",
                h.len(),
                x.len(),
                self.hidden,
                self.input
            )));
        }
        let hd = self.hidden;
        let (wi, wh, bi, bh) = self.layout();
        let gi = self.affine(wi, bi, self.input, x);
        let gh = self.affine(wh, bh, hd, h);
        let r: Vec<f64> = (0..hd).map(|k| sigmoid(gi[k] + gh[k])).collect();
        let z: Vec<f64> = (0..hd).map(|k| sigmoid(gi[hd + k] + gh[hd + k])).collect();
        let hn = gh[2 * hd..].to_vec();
        let n: Vec<f64> = (0..hd).map(|k| (gi[2 * hd + k] + r[k] * hn[k]).tanh()).collect();
        let out = (0..hd).map(|k| (1.0 - z[k]) * n[k] + z[k] * h[k]).collect();
        Ok((out, GruTape { version: self.version, x: x.to_vec(), h: h.to_vec(), r, z, n, hn }))
    }

    /// Adds `vᵀ ∂h'/∂θ` into `grad`; returns `(vᵀ ∂h'/∂h, vᵀ ∂h'/∂x)`.
    pub fn vjp(&self, tape: &GruTape, v: &[f64], grad: &mut [f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if tape.version != self.version {
            return Err(Error::StaleTape { tape: tape.version, params: self.version });
        }
        let hd = self.hidden;
        if v.len() != hd || grad.len() != self.params.len() {
            return Err(Error::Shape("GRU cotangent or gradient buffer width".into()));
        }
        let (wi, wh, bi, bh) = self.layout();
        // gate cotangents on the input path [r; z; n] and hidden path [r; z; hn]
        let mut d_in = vec![0.0; 3 * hd];
        let mut d_hid = vec![0.0; 3 * hd];
        let mut gh: Vec<f64> = (0..hd).map(|k| v[k] * tape.z[k]).collect();
        for k in 0..hd {
            let dn = v[k] * (1.0 - tape.z[k]);
            let dz = v[k] * (tape.h[k] - tape.n[k]);
            let dan = dn * (1.0 - tape.n[k] * tape.n[k]);
            let dr = dan * tape.hn[k];
            let dar = dr * tape.r[k] * (1.0 - tape.r[k]);
            let daz = dz * tape.z[k] * (1.0 - tape.z[k]);
            d_in[k] = dar;
            d_in[hd + k] = daz;
            d_in[2 * hd + k] = dan;
            d_hid[k] = dar;
            d_hid[hd + k] = daz;
            d_hid[2 * hd + k] = dan * tape.r[k];
        }
        let mut gx = vec![0.0; self.input];
        for g in 0..3 * hd {
            let (di, dh) = (d_in[g], d_hid[g]);
            grad[bi + g] += di;
            grad[bh + g] += dh;
            let wrow = wi + g * self.input;
            for j in 0..self.input {
                grad[wrow + j] += di * tape.x[j];
                gx[j] += di * self.params[wrow + j];
            }
            let hrow = wh + g * hd;
            for j in 0..hd {
                grad[hrow + j] += dh * tape.h[j];
                gh[j] += dh * self.params[hrow + j];
            }
        }
        Ok((gh, gx))
    }
}

pub fn gru_step(params: &GruParams, h_prev: &[f64], x: &[f64]) -> Result<(Vec<f64>, GruTape)> {
    params.step(h_prev, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_parameters() {
        let g = GruParams::zeros(2, 3).unwrap();
        let (h, _) = g.step(&[0.4, -0.2, 0.8], &[1.0, 5.0]).unwrap();
        assert_eq!(h, vec![0.2, -0.1, 0.4]);
        let (h, _) = g.step(&[0.0; 3], &[1.0, 5.0]).unwrap();
        assert_eq!(h, vec![0.0; 3]);
        assert!(g.step(&[0.0; 2], &[1.0, 5.0]).is_err());
    }

    #[test]
    fn outputs_stay_in_unit_interval() {
        let g = GruParams::random(3, 4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut h = vec![0.9, -0.9, 0.5, 0.0];
        for k in 0..50 {
            let x = [0.1 * k as f64, -0.2 * k as f64, 3.0];
            h = g.step(&h, &x).unwrap().0;
            assert!(h.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let g = GruParams::random(3, 4, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let h = [0.3, -0.5, 0.1, 0.7];
        let x = [1.0, -0.4, 0.6];
        let v = [0.2, -1.0, 0.5, 0.3];
        let (_, tape) = g.step(&h, &x).unwrap();
        let mut grad = vec![0.0; g.n_params()];
        let (gh, gx) = g.vjp(&tape, &v, &mut grad).unwrap();
        let obj = |g: &GruParams, h: &[f64], x: &[f64]| g.step(h, x).unwrap().0.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        let eps = 1e-5;
        let close = |fd: f64, an: f64| (fd - an).abs() <= 1e-4 * fd.abs().max(1e-3);
        for j in 0..4 {
            let (mut hp, mut hm) = (h, h);
            hp[j] += eps;
            hm[j] -= eps;
            assert!(close((obj(&g, &hp, &x) - obj(&g, &hm, &x)) / (2.0 * eps), gh[j]));
        }
        for j in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[j] += eps;
            xm[j] -= eps;
            assert!(close((obj(&g, &h, &xp) - obj(&g, &h, &xm)) / (2.0 * eps), gx[j]));
        }
        for k in 0..g.n_params() {
            let mut gp = g.clone();
            gp.params_mut()[k] += eps;
            let mut gm = g.clone();
            gm.params_mut()[k] -= eps;
            let fd = (obj(&gp, &h, &x) - obj(&gm, &h, &x)) / (2.0 * eps);
            assert!(close(fd, grad[k]), "param {k}: {fd} vs {}", grad[k]);
        }
    }
}
