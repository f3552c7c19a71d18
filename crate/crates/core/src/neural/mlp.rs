use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numkit::DenseMatrix;
use crate::{Error, Result};

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

/// Globally unique stamp for a parameter state; tapes remember the stamp of
/// the parameters they were recorded with.
pub(crate) fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    pub fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Uniform initialization in `±sqrt(1 / fan_in)`.
pub(crate) fn init_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, out: &mut [f64]) {
    let bound = (1.0 / fan_in.max(1) as f64).sqrt();
    for v in out {
        *v = rng.gen_range(-bound..bound);
    }
}

/// Fully connected network `x → W_L σ(… σ(W_1 x + b_1) …) + b_L`.
///
/// Parameters live in one flat vector, layer by layer, each layer storing its
/// row-major weight matrix (`out × in`) followed by its bias.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MlpParams {
    widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    params: Vec<f64>,
    #[serde(skip, default = "fresh_version")]
    version: u64,
}

impl PartialEq for MlpParams {
    fn eq(&self, other: &Self) -> bool {
        self.widths == other.widths
            && self.hidden_activation == other.hidden_activation
            && self.output_activation == other.output_activation
            && self.params == other.params
    }
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

/// Recorded activations of one forward pass.
#[derive(Clone, Debug)]
pub struct MlpTape {
    version: u64,
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
}

impl MlpTape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("tape holds at least the input")
    }

    pub fn input(&self) -> &[f64] {
        &self.acts[0]
    }
}

impl MlpParams {
    /// Zero-initialized network; `widths` lists input, hidden and output sizes.
    pub fn zeros(widths: &[usize], hidden_activation: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::Shape(format!("invalid layer widths {widths:?}")));
        }
        Ok(Self {
            widths: widths.to_vec(),
            hidden_activation,
            output_activation: Activation::Identity,
            params: vec![0.0; param_count(widths)],
            version: fresh_version(),
        })
    }

    pub fn random<R: Rng + ?Sized>(widths: &[usize], hidden_activation: Activation, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(widths, hidden_activation)?;
        let mut off = 0;
        for w in widths.windows(2) {
            let n = w[1] * (w[0] + 1);
            init_uniform(rng, w[0], &mut m.params[off..off + n]);
            off += n;
        }
        Ok(m)
    }

    pub fn from_parts(widths: &[usize], hidden_activation: Activation, output_activation: Activation, params: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(widths, hidden_activation)?;
        m.output_activation = output_activation;
        m.set_params(&params)?;
        Ok(m)
    }

    pub fn with_output_activation(mut self, act: Activation) -> Self {
        self.output_activation = act;
        self.version = fresh_version();
        self
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated widths")
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access; invalidates every tape recorded so far.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version = fresh_version();
        &mut self.params
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::Shape(format!("{} parameters for a network with {}", values.len(), self.params.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        self.params_mut().copy_from_slice(values);
        Ok(())
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    fn offsets(&self, layer: usize) -> (usize, usize, usize, usize) {
        let off: usize = self.widths[..layer + 1].windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        let (n_in, n_out) = (self.widths[layer], self.widths[layer + 1]);
        (off, n_in, n_out, off + n_in * n_out)
    }

    /// Weight (row-major `out × in`) and bias of `layer`.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let (w, n_in, n_out, b) = self.offsets(layer);
        (&self.params[w..w + n_in * n_out], &self.params[b..b + n_out])
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::Shape(format!("input of width {} for a network expecting {}", x.len(), self.input_width())));
        }
        Ok(())
    }

    fn apply_layer(&self, layer: usize, x: &[f64]) -> Vec<f64> {
        let (w, b) = self.layer(layer);
        let act = self.activation(layer);
        let n_in = x.len();
        b.iter()
            .enumerate()
            .map(|(i, &bi)| {
                let row = &w[i * n_in..(i + 1) * n_in];
                act.apply(bi + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            })
            .collect()
    }

    /// Output without recording a tape.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            a = self.apply_layer(l, &a);
        }
        Ok(a)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, MlpTape)> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.n_layers() + 1);
        acts.push(x.to_vec());
        for l in 0..self.n_layers() {
            let next = self.apply_layer(l, &acts[l]);
            acts.push(next);
        }
        let y = acts.last().cloned().expect("at least one layer");
        Ok((y, MlpTape { version: self.version, acts }))
    }

    /// Reverse-mode product: adds `vᵀ ∂y/∂θ` into `grad` and returns `vᵀ ∂y/∂x`.
    pub fn vjp(&self, tape: &MlpTape, v: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        if tape.version != self.version {
            return Err(Error::StaleTape { tape: tape.version, params: self.version });
        }
        if v.len() != self.output_width() {
            return Err(Error::Shape(format!("cotangent of width {} for output width {}", v.len(), self.output_width())));
        }
        if grad.len() != self.params.len() {
            return Err(Error::Shape(format!("gradient buffer of {} for {} parameters", grad.len(), self.params.len())));
        }
        let mut delta = v.to_vec();
        for l in (0..self.n_layers()).rev() {
            let act = self.activation(l);
            let out = &tape.acts[l + 1];
            let input = &tape.acts[l];
            for (d, &y) in delta.iter_mut().zip(out) {
                *d *= act.derivative_at_output(y);
            }
            let (w_off, n_in, n_out, b_off) = self.offsets(l);
            let w = &self.params[w_off..w_off + n_in * n_out];
            let mut back = vec![0.0; n_in];
            for i in 0..n_out {
                let di = delta[i];
                if di == 0.0 {
                    continue;
                }
                grad[b_off + i] += di;
                let g_row = &mut grad[w_off + i * n_in..w_off + (i + 1) * n_in];
                for (g, &xj) in g_row.iter_mut().zip(input) {
                    *g += di * xj;
                }
                for (bk, &wij) in back.iter_mut().zip(&w[i * n_in..(i + 1) * n_in]) {
                    *bk += di * wij;
                }
            }
            delta = back;
        }
        Ok(delta)
    }

    /// `∂y/∂x` assembled row by row from reverse-mode products.
    pub fn jacobian(&self, x: &[f64]) -> Result<DenseMatrix> {
        let (_, tape) = self.forward(x)?;
        let (m, n) = (self.output_width(), self.input_width());
        let mut jac = DenseMatrix::zeros(m, n);
        let mut scratch = vec![0.0; self.n_params()];
        let mut e = vec![0.0; m];
        for i in 0..m {
            e[i] = 1.0;
            let row = self.vjp(&tape, &e, &mut scratch)?;
            jac.row_mut(i).copy_from_slice(&row);
            e[i] = 0.0;
        }
        Ok(jac)
    }
}

pub fn mlp_forward(params: &MlpParams, x: &[f64]) -> Result<(Vec<f64>, MlpTape)> {
    params.forward(x)
}

/// Returns `(vᵀ ∂y/∂x, vᵀ ∂y/∂θ)`.
pub fn mlp_vjp(params: &MlpParams, tape: &MlpTape, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut grad = vec![0.0; params.n_params()];
    let gx = params.vjp(tape, v, &mut grad)?;
    Ok((gx, grad))
}
