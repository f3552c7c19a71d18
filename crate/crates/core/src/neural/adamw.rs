use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamWConfig {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }
}

/// A named parameter slice and its gradient.
pub struct ParamBlock<'a> {
    pub name: &'a str,
    pub params: &'a mut [f64],
    pub grads: &'a [f64],
}

/// Moment accumulators, one pair per parameter block, in block order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWState {
    pub config: AdamWConfig,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamWState {
    pub fn new(config: AdamWConfig, block_sizes: &[usize]) -> Self {
        Self {
            config,
            step: 0,
            m: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One AdamW update: decoupled decay `p ← p (1 − lr·λ)`, then the
/// bias-corrected Adam step. Gradients are checked before anything moves.
pub fn adamw_step(blocks: &mut [ParamBlock<'_>], state: &mut AdamWState) -> Result<()> {
    if blocks.len() != state.m.len() {
        return Err(Error::Shape(format!("{} parameter blocks for an optimizer over {}", blocks.len(), state.m.len())));
    }
    for (b, m) in blocks.iter().zip(&state.m) {
        if b.params.len() != m.len() || b.grads.len() != m.len() {
            return Err(Error::Shape(format!("block '{}' does not match its moments", b.name)));
        }
        if b.grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::GradientExplosion(b.name.to_string()));
        }
    }
    let c = state.config;
    state.step += 1;
    let bc1 = 1.0 - c.beta1.powi(state.step as i32);
    let bc2 = 1.0 - c.beta2.powi(state.step as i32);
    let decay = 1.0 - c.lr * c.weight_decay;
    for ((b, m), v) in blocks.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        for i in 0..m.len() {
            let g = b.grads[i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
            let p = b.params[i] * decay;
            b.params[i] = p - c.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + c.eps);
        }
    }
    Ok(())
}

/// Scales all gradients so their joint Euclidean norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = grads.iter().flat_map(|g| g.iter()).map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| g.iter_mut().for_each(|x| *x *= s));
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_scalar(p: &mut f64, g: f64, state: &mut AdamWState) -> Result<()> {
        let mut blocks = [ParamBlock { name: "p", params: std::slice::from_mut(p), grads: &[g] }];
        adamw_step(&mut blocks, state)
    }

    #[test]
    fn zero_gradient_without_decay() {
        let mut st = AdamWState::new(AdamWConfig::new(0.1).with_weight_decay(0.0), &[1]);
        let mut p = 2.5;
        step_scalar(&mut p, 0.0, &mut st).unwrap();
        assert_eq!(p, 2.5);
        assert_eq!((st.m[0][0], st.v[0][0], st.step), (0.0, 0.0, 1));
    }

    #[test]
    fn first_step_is_lr() {
        let mut st = AdamWState::new(AdamWConfig::new(0.1).with_weight_decay(0.0), &[1]);
        let mut p = 0.0;
        step_scalar(&mut p, 1.0, &mut st).unwrap();
        assert!((p + 0.1).abs() < 1e-8);
    }

    #[test]
    fn decoupled_decay() {
        let mut st = AdamWState::new(AdamWConfig::new(0.1).with_weight_decay(0.1), &[1]);
        let mut p = 1.0;
        for k in 1..=3 {
            step_scalar(&mut p, 0.0, &mut st).unwrap();
            assert!((p - 0.99f64.powi(k)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_decay_is_adam() {
        let cfg = AdamWConfig::new(0.05).with_weight_decay(0.0);
        let mut st = AdamWState::new(cfg, &[1]);
        let (mut p, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut q = 1.0;
        for t in 1..=10 {
            let g = 2.0 * q - 0.5;
            step_scalar(&mut q, g, &mut st).unwrap();
            let g = 2.0 * p - 0.5;
            m = 0.9 * m + (1.0 - 0.9) * g;
            v = 0.999 * v + (1.0 - 0.999) * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            p -= 0.05 * mh / (vh.sqrt() + 1e-8);
            assert_eq!(p, q);
        }
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut st = AdamWState::new(AdamWConfig::new(0.1), &[1]);
        let mut p = 1.0;
        match step_scalar(&mut p, f64::NAN, &mut st) {
            Err(Error::GradientExplosion(name)) => assert_eq!(name, "p"),
            other => panic!("{other:?}"),
        }
        assert_eq!((p, st.step), (1.0, 0));
    }

    #[test]
    fn clipping() {
        let mut a = vec![3.0];
        let mut b = vec![4.0];
        let n = clip_global_norm(&mut [&mut a, &mut b], 1.0);
        assert_eq!(n, 5.0);
        assert!((a[0] - 0.6).abs() < 1e-15 && (b[0] - 0.8).abs() < 1e-15);
    }
}
