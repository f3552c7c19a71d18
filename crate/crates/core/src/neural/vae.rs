use serde::{Deserialize, Serialize};

use super::mlp::{MlpParams, MlpTape};
use crate::{Error, Result};

pub const LOGVAR_BOUND: f64 = 10.0;

/// Network producing `[mean | log-variance]` for a latent of width
/// `output_width / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeHead {
    pub net: MlpParams,
}

#[derive(Clone, Debug)]
pub struct VaeTape {
    net: MlpTape,
    noise: Vec<f64>,
    mean: Vec<f64>,
    logvar: Vec<f64>,
    clamped: Vec<bool>,
}

impl VaeHead {
    pub fn new(net: MlpParams) -> Result<Self> {
        if net.output_width() % 2 != 0 {
            return Err(Error::Shape(format!("VAE head needs an even output width, got {}", net.output_width())));
        }
        Ok(Self { net })
    }

    pub fn latent_width(&self) -> usize {
        self.net.output_width() / 2
    }

    /// Reparameterized sample and its KL divergence from the standard normal.
    pub fn sample(&self, encoding: &[f64], noise: &[f64]) -> Result<(Vec<f64>, f64, VaeTape)> {
        let k = self.latent_width();
        if noise.len() != k {
            return Err(Error::Shape(format!("noise of width {} for latent width {k}", noise.len())));
        }
        let (out, tape) = self.net.forward(encoding)?;
        let mean = out[..k].to_vec();
        let raw = &out[k..];
        let clamped: Vec<bool> = raw.iter().map(|v| v.abs() > LOGVAR_BOUND).collect();
        let logvar: Vec<f64> = raw.iter().map(|v| v.clamp(-LOGVAR_BOUND, LOGVAR_BOUND)).collect();
        let latent = (0..k).map(|i| mean[i] + (0.5 * logvar[i]).exp() * noise[i]).collect();
        let kl = kl_divergence(&mean, &logvar);
        Ok((latent, kl, VaeTape { net: tape, noise: noise.to_vec(), mean, logvar, clamped }))
    }

    /// Backpropagates `dL/dlatent` plus `kl_weight · KL`; accumulates the
    /// parameter gradient and returns `dL/dencoding`.
    pub fn vjp(&self, tape: &VaeTape, d_latent: &[f64], kl_weight: f64, grad: &mut [f64]) -> Result<Vec<f64>> {
        let k = self.latent_width();
        if d_latent.len() != k {
            return Err(Error::Shape("latent cotangent width".into()));
        }
        let mut d_out = vec![0.0; 2 * k];
        for i in 0..k {
            let sd = (0.5 * tape.logvar[i]).exp();
            d_out[i] = d_latent[i] + kl_weight * tape.mean[i];
            if !tape.clamped[i] {
                d_out[k + i] = d_latent[i] * tape.noise[i] * 0.5 * sd + kl_weight * 0.5 * (sd * sd - 1.0);
            }
        }
        self.net.vjp(&tape.net, &d_out, grad)
    }
}

pub fn kl_divergence(mean: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mean.iter().zip(logvar).map(|(m, lv)| lv.exp() + m * m - 1.0 - lv).sum::<f64>()
}

pub fn vae_sample(head: &VaeHead, encoding: &[f64], noise: &[f64]) -> Result<(Vec<f64>, f64)> {
    head.sample(encoding, noise).map(|(z, kl, _)| (z, kl))
}
