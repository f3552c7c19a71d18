use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::neural::{sigmoid, softplus, Activation, MlpParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Node,
    Hbnode,
    Ghbnode,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Node, ModelKind::Hbnode, ModelKind::Ghbnode];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Node => "node",
            ModelKind::Hbnode => "hbnode",
            ModelKind::Ghbnode => "ghbnode",
        }
    }

    pub fn is_second_order(self) -> bool {
        self != ModelKind::Node
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node" => Ok(ModelKind::Node),
            "hbnode" => Ok(ModelKind::Hbnode),
            "ghbnode" => Ok(ModelKind::Ghbnode),
            other => Err(Error::Config(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Autonomous latent vector field in one of three forms:
///
/// * node:    `h' = f(h)`
/// * hbnode:  `h' = m`, `m' = −γm + f(h)`
/// * ghbnode: `h' = σ(m)`, `m' = −γm + f(h) − ξh`
///
/// with `γ = ε·sigmoid(ω)` and `ξ = softplus(χ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeModel {
    pub kind: ModelKind,
    pub net: MlpParams,
    pub omega: f64,
    pub epsilon: f64,
    pub chi: f64,
    pub sigma: Activation,
}

/// Products of an adjoint vector with the Jacobians of the vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldVjp {
    /// `aᵀ ∂F/∂s`
    pub state: Vec<f64>,
    pub omega: f64,
    pub chi: f64,
}

impl OdeModel {
    pub fn new(kind: ModelKind, net: MlpParams) -> Result<Self> {
        if net.input_width() != net.output_width() {
            return Err(Error::Shape(format!(
                "vector field maps {} to {} dimensions",
                net.input_width(),
                net.output_width()
            )));
        }
        Ok(Self { kind, net, omega: 0.0, epsilon: 1.0, chi: -3.0, sigma: Activation::Tanh })
    }

    /// Randomly initialized model whose network has `layers` affine layers of
    /// width `hidden` between latent input and output.
    pub fn random<R: Rng + ?Sized>(kind: ModelKind, latent: usize, hidden: usize, layers: usize, rng: &mut R) -> Result<Self> {
        if layers == 0 {
            return Err(Error::Config("vector field needs at least one layer".into()));
        }
        let mut widths = vec![latent];
        widths.extend(std::iter::repeat(hidden).take(layers - 1));
        widths.push(latent);
        Self::new(kind, MlpParams::random(&widths, Activation::Tanh, rng)?)
    }

    pub fn latent(&self) -> usize {
        self.net.input_width()
    }

    pub fn state_width(&self) -> usize {
        if self.kind.is_second_order() {
            2 * self.latent()
        } else {
            self.latent()
        }
    }

    pub fn gamma(&self) -> f64 {
        self.epsilon * sigmoid(self.omega)
    }

    pub fn dgamma_domega(&self) -> f64 {
        let s = sigmoid(self.omega);
        self.epsilon * s * (1.0 - s)
    }

    pub fn xi(&self) -> f64 {
        if self.kind == ModelKind::Ghbnode {
            softplus(self.chi)
        } else {
            0.0
        }
    }

    fn check(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.state_width() {
            return Err(Error::Shape(format!("state of width {} for a {} model of width {}", s.len(), self.kind, self.state_width())));
        }
        Ok(())
    }

    /// Time derivative of a single state.
    pub fn rhs(&self, s: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(s)?;
        if out.len() != s.len() {
            return Err(Error::Shape("rhs output width".into()));
        }
        let d = self.latent();
        let f = self.net.eval(&s[..d])?;
        match self.kind {
            ModelKind::Node => out.copy_from_slice(&f),
            ModelKind::Hbnode | ModelKind::Ghbnode => {
                let (gamma, xi) = (self.gamma(), self.xi());
                let (h, m) = s.split_at(d);
                for k in 0..d {
                    out[k] = if self.kind == ModelKind::Hbnode { m[k] } else { self.sigma.apply(m[k]) };
                    out[d + k] = -gamma * m[k] + f[k] - xi * h[k];
                }
            }
        }
        Ok(())
    }

    /// Derivative of a batch of states stored back to back.
    pub fn rhs_batch(&self, s: &[f64], out: &mut [f64]) -> Result<()> {
        let w = self.state_width();
        if s.len() % w != 0 || out.len() != s.len() {
            return Err(Error::Shape(format!("batch of width {} is not a multiple of {w}", s.len())));
        }
        for (sb, ob) in s.chunks(w).zip(out.chunks_mut(w)) {
            self.rhs(sb, ob)?;
        }
        Ok(())
    }

    /// `aᵀ ∂F/∂s`, adding `aᵀ ∂F/∂θ` into `grad_theta`; also returns the
    /// products with respect to ω and χ.
    pub fn field_vjp(&self, s: &[f64], a: &[f64], grad_theta: &mut [f64]) -> Result<FieldVjp> {
        self.check(s)?;
        self.check(a)?;
        let d = self.latent();
        let (_, tape) = self.net.forward(&s[..d])?;
        match self.kind {
            ModelKind::Node => {
                let state = self.net.vjp(&tape, a, grad_theta)?;
                Ok(FieldVjp { state, omega: 0.0, chi: 0.0 })
            }
            ModelKind::Hbnode | ModelKind::Ghbnode => {
                let (h, m) = s.split_at(d);
                let (a_h, a_m) = a.split_at(d);
                let (gamma, xi) = (self.gamma(), self.xi());
                let mut state = self.net.vjp(&tape, a_m, grad_theta)?;
                state.resize(2 * d, 0.0);
                let mut omega = 0.0;
                let mut chi = 0.0;
                let dxi = sigmoid(self.chi);
                for k in 0..d {
                    state[k] -= xi * a_m[k];
                    let dsig = if self.kind == ModelKind::Hbnode {
                        1.0
                    } else {
                        self.sigma.derivative_at_output(self.sigma.apply(m[k]))
                    };
                    state[d + k] = a_h[k] * dsig - gamma * a_m[k];
                    omega -= a_m[k] * m[k];
                    if self.kind == ModelKind::Ghbnode {
                        chi -= a_m[k] * h[k] * dxi;
                    }
                }
                Ok(FieldVjp { state, omega: omega * self.dgamma_domega(), chi })
            }
        }
    }

    /// Right-hand side of the backward adjoint system in `t` for one state:
    /// `a' = −aᵀ ∂F/∂s`.
    pub fn adjoint_rhs(&self, s: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        let mut scratch = vec![0.0; self.net.n_params()];
        Ok(self.field_vjp(s, a, &mut scratch)?.state.into_iter().map(|v| -v).collect())
    }
}
