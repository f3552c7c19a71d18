use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::windows::Window;
use crate::dynamics::{adjoint_gradient_jumps, forward_batch, AdjointConfig, ModelKind, OdeModel};
use crate::neural::{Activation, GruParams, GruTape, MlpParams, MlpTape, VaeHead, VaeTape};
use crate::numkit::{norm2, DenseMatrix};
use crate::odeint::{dense_eval, Dopri5Config, Trajectory};
use crate::{Error, Result};

/// Encoder → latent ODE → decoder network in one of two layouts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "snake_case")]
pub enum Network {
    Seq2Seq(Seq2SeqModel),
    Vae(VaeOneStepModel),
}

/// GRU encoder over the input window, an affine map to the initial ODE
/// state (`h₀`, plus `m₀` for second-order models), the ODE integrated one
/// time unit per output step, and a GRU decoder reading `h(t_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqModel {
    pub encoder: GruParams,
    pub to_state: MlpParams,
    pub ode: OdeModel,
    pub decoder: GruParams,
    pub readout: MlpParams,
}

/// Single-step model: an MLP encoder producing a Gaussian over the initial
/// ODE state, one unit of ODE time, and an MLP decoder of `h(1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeOneStepModel {
    pub encoder: VaeHead,
    pub ode: OdeModel,
    pub decoder: MlpParams,
}

/// Loss, gradient blocks (in [`Network::block_names`] order) and sweep
/// statistics for one batch.
#[derive(Clone, Debug)]
pub struct BatchOutcome {
    pub mse: f64,
    pub kl: f64,
    pub grads: Vec<Vec<f64>>,
    pub fwd_nfe: usize,
    pub bwd_nfe: usize,
    pub adj_norm_t0: f64,
    pub adj_norm_t_end: f64,
    /// Sum over the batch of the initial ODE states.
    pub s0_sum: Vec<f64>,
    pub max_h_norm: f64,
    pub max_h_drift: f64,
}

pub(crate) fn ode_config(cfg: &TrainConfig) -> Dopri5Config {
    Dopri5Config { max_steps: cfg.max_steps, ..Dopri5Config::with_tolerances(cfg.rtol, cfg.atol) }
}

fn adjoint_config(cfg: &TrainConfig) -> AdjointConfig {
    let mut a = AdjointConfig::with_tolerances(cfg.rtol, cfg.atol);
    a.ode.max_steps = cfg.max_steps;
    a
}

fn mlp_widths(input: usize, hidden: usize, layers: usize, output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend(std::iter::repeat(hidden).take(layers - 1));
    w.push(output);
    w
}

fn tag_windows(err: Error, ids: &[usize]) -> Error {
    match err {
        Error::Integration { t, detail } => Error::Integration { t, detail: format!("{detail} (windows {ids:?})") },
        Error::Instability { step, detail } => Error::Instability { step, detail: format!("{detail} (windows {ids:?})") },
        other => other,
    }
}

fn max_h_norm(traj: &Trajectory, ode: &OdeModel) -> f64 {
    let (w, d) = (ode.state_width(), ode.latent());
    traj.states.iter().flat_map(|s| s.chunks(w).map(move |b| norm2(&b[..d]))).fold(0.0, f64::max)
}

/// Largest `‖h(t) − h(t₀)‖` over the batch.
fn max_h_drift(traj: &Trajectory, ode: &OdeModel) -> f64 {
    let (w, d) = (ode.state_width(), ode.latent());
    let start = &traj.states[0];
    let mut out = 0.0_f64;
    for s in &traj.states {
        for (b, a) in s.chunks(w).zip(start.chunks(w)) {
            let diff: Vec<f64> = b[..d].iter().zip(&a[..d]).map(|(x, y)| x - y).collect();
            out = out.max(norm2(&diff));
        }
    }
    out
}

/// Mean squared error over all entries and `d/dpred` of it.
fn mse_and_grad(preds: &[DenseMatrix], labels: &[&DenseMatrix]) -> (f64, Vec<DenseMatrix>) {
    let n: usize = labels.iter().map(|l| l.rows() * l.cols()).sum();
    let mut sum = 0.0;
    let grads = preds
        .iter()
        .zip(labels)
        .map(|(p, l)| {
            DenseMatrix::from_fn(p.rows(), p.cols(), |i, j| {
                let e = p[(i, j)] - l[(i, j)];
                sum += e * e;
                2.0 * e / n as f64
            })
        })
        .collect();
    (sum / n as f64, grads)
}

impl Network {
    pub fn new<R: Rng + ?Sized>(cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        if cfg.task.is_vae() {
            VaeOneStepModel::new(cfg, rng).map(Network::Vae)
        } else {
            Seq2SeqModel::new(cfg, rng).map(Network::Seq2Seq)
        }
    }

    pub fn ode(&self) -> &OdeModel {
        match self {
            Network::Seq2Seq(m) => &m.ode,
            Network::Vae(m) => &m.ode,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.ode().kind
    }

    /// Width of the coefficient vectors the network consumes and emits.
    pub fn modes(&self) -> usize {
        match self {
            Network::Seq2Seq(m) => m.encoder.input_width(),
            Network::Vae(m) => m.encoder.net.input_width(),
        }
    }

    /// Names of the trainable parameter blocks. `omega` is trained by
    /// second-order models only and `chi` by GHBNODE only.
    pub fn block_names(&self) -> Vec<&'static str> {
        self.filter(self.all_block_names())
    }

    fn block_mask(&self) -> Vec<bool> {
        let kind = self.kind();
        self.all_block_names()
            .iter()
            .map(|name| match *name {
                "omega" => kind.is_second_order(),
                "chi" => kind == ModelKind::Ghbnode,
                _ => true,
            })
            .collect()
    }

    fn filter<T>(&self, items: Vec<T>) -> Vec<T> {
        items.into_iter().zip(self.block_mask()).filter_map(|(item, keep)| keep.then_some(item)).collect()
    }

    fn all_block_names(&self) -> Vec<&'static str> {
        match self {
            Network::Seq2Seq(_) => vec!["encoder", "to_state", "ode_net", "omega", "chi", "decoder", "readout"],
            Network::Vae(_) => vec!["encoder", "ode_net", "omega", "chi", "decoder"],
        }
    }

    /// Parameter blocks in [`Network::block_names`] order.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let all = match self {
            Network::Seq2Seq(m) => vec![
                m.encoder.params(),
                m.to_state.params(),
                m.ode.net.params(),
                std::slice::from_ref(&m.ode.omega),
                std::slice::from_ref(&m.ode.chi),
                m.decoder.params(),
                m.readout.params(),
            ],
            Network::Vae(m) => vec![
                m.encoder.net.params(),
                m.ode.net.params(),
                std::slice::from_ref(&m.ode.omega),
                std::slice::from_ref(&m.ode.chi),
                m.decoder.params(),
            ],
        };
        self.filter(all)
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mask = self.block_mask();
        let all = match self {
            Network::Seq2Seq(m) => vec![
                m.encoder.params_mut(),
                m.to_state.params_mut(),
                m.ode.net.params_mut(),
                std::slice::from_mut(&mut m.ode.omega),
                std::slice::from_mut(&mut m.ode.chi),
                m.decoder.params_mut(),
                m.readout.params_mut(),
            ],
            Network::Vae(m) => vec![
                m.encoder.net.params_mut(),
                m.ode.net.params_mut(),
                std::slice::from_mut(&mut m.ode.omega),
                std::slice::from_mut(&mut m.ode.chi),
                m.decoder.params_mut(),
            ],
        };
        all.into_iter().zip(mask).filter_map(|(block, keep)| keep.then_some(block)).collect()
    }

    /// Deterministic predictions (`seq_out × r` each) for a batch of input
    /// windows integrated jointly; returns the forward NFE as well.
    pub fn predict(&self, inputs: &[&DenseMatrix], seq_out: usize, ode_cfg: &Dopri5Config) -> Result<(Vec<DenseMatrix>, usize)> {
        match self {
            Network::Seq2Seq(m) => m.run(inputs, seq_out, ode_cfg).map(|f| (f.preds, f.traj.nfe)),
            Network::Vae(m) => {
                if seq_out != 1 {
                    return Err(Error::Config("the one-step model predicts a single step".into()));
                }
                let noise = vec![vec![0.0; m.ode.state_width()]; inputs.len()];
                m.run(inputs, &noise, ode_cfg).map(|f| (f.preds, f.traj.nfe))
            }
        }
    }

    /// Loss and gradients for the windows `ids` of `windows`. `noise` is
    /// used by the VAE layout only (one standard-normal vector per window).
    pub fn loss_grad(&self, windows: &[&Window], ids: &[usize], noise: Option<&[Vec<f64>]>, cfg: &TrainConfig) -> Result<BatchOutcome> {
        match self {
            Network::Seq2Seq(m) => m.loss_grad(windows, cfg),
            Network::Vae(m) => {
                let zeros;
                let noise = match noise {
                    Some(n) => n,
                    None => {
                        zeros = vec![vec![0.0; m.ode.state_width()]; windows.len()];
                        &zeros
                    }
                };
                m.loss_grad(windows, noise, cfg)
            }
        }
        .map(|mut out| {
            out.grads = self.filter(out.grads);
            out
        })
        .map_err(|e| tag_windows(e, ids))
    }
}

struct SeqForward {
    enc: Vec<Vec<GruTape>>,
    to_state: Vec<MlpTape>,
    traj: Trajectory,
    dec: Vec<Vec<(GruTape, MlpTape)>>,
    preds: Vec<DenseMatrix>,
}

impl Seq2SeqModel {
    pub fn new<R: Rng + ?Sized>(cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        let mut ode = OdeModel::random(cfg.model, cfg.latent, cfg.hidden, cfg.layers, rng)?;
        ode.epsilon = cfg.epsilon;
        let sw = ode.state_width();
        Ok(Self {
            encoder: GruParams::random(cfg.r, cfg.rnn_units, rng)?,
            to_state: MlpParams::random(&[cfg.rnn_units, sw], Activation::Identity, rng)?,
            decoder: GruParams::random(cfg.latent, cfg.rnn_units, rng)?,
            readout: MlpParams::random(&[cfg.rnn_units, cfg.r], Activation::Identity, rng)?,
            ode,
        })
    }

    fn run(&self, inputs: &[&DenseMatrix], seq_out: usize, ode_cfg: &Dopri5Config) -> Result<SeqForward> {
        if inputs.is_empty() {
            return Err(Error::InsufficientData("empty batch".into()));
        }
        let (sw, d, units) = (self.ode.state_width(), self.ode.latent(), self.encoder.hidden_width());
        let mut enc = Vec::with_capacity(inputs.len());
        let mut to_state = Vec::with_capacity(inputs.len());
        let mut s0 = Vec::with_capacity(inputs.len() * sw);
        for x in inputs {
            let mut h = vec![0.0; units];
            let mut tapes = Vec::with_capacity(x.rows());
            for i in 0..x.rows() {
                let (next, tape) = self.encoder.step(&h, x.row(i))?;
                h = next;
                tapes.push(tape);
            }
            let (s, tape) = self.to_state.forward(&h)?;
            s0.extend_from_slice(&s);
            enc.push(tapes);
            to_state.push(tape);
        }
        let traj = forward_batch(&self.ode, &s0, 0.0, seq_out as f64, ode_cfg)?;
        let states: Vec<Vec<f64>> = (1..=seq_out).map(|k| dense_eval(&traj, k as f64)).collect::<Result<_>>()?;
        let mut dec = Vec::with_capacity(inputs.len());
        let mut preds = Vec::with_capacity(inputs.len());
        for b in 0..inputs.len() {
            let mut h = vec![0.0; self.decoder.hidden_width()];
            let mut tapes = Vec::with_capacity(seq_out);
            let mut y = DenseMatrix::zeros(seq_out, self.readout.output_width());
            for (k, s) in states.iter().enumerate() {
                let (next, gt) = self.decoder.step(&h, &s[b * sw..b * sw + d])?;
                h = next;
                let (out, rt) = self.readout.forward(&h)?;
                y.row_mut(k).copy_from_slice(&out);
                tapes.push((gt, rt));
            }
            dec.push(tapes);
            preds.push(y);
        }
        Ok(SeqForward { enc, to_state, traj, dec, preds })
    }

    fn loss_grad(&self, windows: &[&Window], cfg: &TrainConfig) -> Result<BatchOutcome> {
        let seq_out = windows.first().map_or(0, |w| w.labels.rows());
        let inputs: Vec<&DenseMatrix> = windows.iter().map(|w| &w.inputs).collect();
        let labels: Vec<&DenseMatrix> = windows.iter().map(|w| &w.labels).collect();
        let fwd = self.run(&inputs, seq_out, &ode_config(cfg))?;
        let (mse, dy) = mse_and_grad(&fwd.preds, &labels);
        let (sw, d) = (self.ode.state_width(), self.ode.latent());
        let batch = windows.len();

        let mut g_dec = vec![0.0; self.decoder.n_params()];
        let mut g_read = vec![0.0; self.readout.n_params()];
        let mut obs: Vec<(f64, Vec<f64>)> = (1..=seq_out).map(|k| (k as f64, vec![0.0; batch * sw])).collect();
        for b in 0..batch {
            let mut dh = vec![0.0; self.decoder.hidden_width()];
            for k in (0..seq_out).rev() {
                let (gt, rt) = &fwd.dec[b][k];
                let from_out = self.readout.vjp(rt, dy[b].row(k), &mut g_read)?;
                dh.iter_mut().zip(&from_out).for_each(|(a, v)| *a += v);
                let (dh_prev, dx) = self.decoder.vjp(gt, &dh, &mut g_dec)?;
                obs[k].1[b * sw..b * sw + d].copy_from_slice(&dx);
                dh = dh_prev;
            }
        }
        let adj = adjoint_gradient_jumps(&self.ode, &fwd.traj, &obs, &adjoint_config(cfg))?;

        let mut g_enc = vec![0.0; self.encoder.n_params()];
        let mut g_state = vec![0.0; self.to_state.n_params()];
        for b in 0..batch {
            let mut dh = self.to_state.vjp(&fwd.to_state[b], &adj.initial_adjoint[b * sw..(b + 1) * sw], &mut g_state)?;
            for tape in fwd.enc[b].iter().rev() {
                dh = self.encoder.vjp(tape, &dh, &mut g_enc)?.0;
            }
        }
        let mut s0_sum = vec![0.0; sw];
        for s in fwd.traj.states[0].chunks(sw) {
            s0_sum.iter_mut().zip(s).for_each(|(a, v)| *a += v);
        }
        Ok(BatchOutcome {
            mse,
            kl: 0.0,
            grads: vec![g_enc, g_state, adj.grad_theta, vec![adj.grad_omega], vec![adj.grad_chi], g_dec, g_read],
            fwd_nfe: fwd.traj.nfe,
            bwd_nfe: adj.backward_nfe,
            adj_norm_t0: adj.trace.initial_norm(),
            adj_norm_t_end: adj.trace.terminal_norm(),
            s0_sum,
            max_h_norm: max_h_norm(&fwd.traj, &self.ode),
            max_h_drift: max_h_drift(&fwd.traj, &self.ode),
        })
    }
}

struct VaeForward {
    enc: Vec<VaeTape>,
    kl: Vec<f64>,
    traj: Trajectory,
    dec: Vec<MlpTape>,
    preds: Vec<DenseMatrix>,
}

impl VaeOneStepModel {
    pub fn new<R: Rng + ?Sized>(cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        let mut ode = OdeModel::random(cfg.model, cfg.latent, cfg.hidden, cfg.layers, rng)?;
        ode.epsilon = cfg.epsilon;
        let sw = ode.state_width();
        let enc = MlpParams::random(&mlp_widths(cfg.r, cfg.encoder_units, cfg.encoder_layers, 2 * sw), Activation::Tanh, rng)?;
        let dec = MlpParams::random(&mlp_widths(cfg.latent, cfg.decoder_units, cfg.decoder_layers, cfg.r), Activation::Tanh, rng)?;
        Ok(Self { encoder: VaeHead::new(enc)?, ode, decoder: dec })
    }

    fn run(&self, inputs: &[&DenseMatrix], noise: &[Vec<f64>], ode_cfg: &Dopri5Config) -> Result<VaeForward> {
        if inputs.is_empty() || noise.len() != inputs.len() {
            return Err(Error::Shape("one noise vector per window is required".into()));
        }
        let (sw, d) = (self.ode.state_width(), self.ode.latent());
        let mut enc = Vec::with_capacity(inputs.len());
        let mut kl = Vec::with_capacity(inputs.len());
        let mut s0 = Vec::with_capacity(inputs.len() * sw);
        for (x, e) in inputs.iter().zip(noise) {
            if x.rows() != 1 {
                return Err(Error::Shape(format!("one-step model takes a single input row, got {}", x.rows())));
            }
            let (s, k, tape) = self.encoder.sample(x.row(0), e)?;
            s0.extend_from_slice(&s);
            enc.push(tape);
            kl.push(k);
        }
        let traj = forward_batch(&self.ode, &s0, 0.0, 1.0, ode_cfg)?;
        let end = traj.final_state();
        let mut dec = Vec::with_capacity(inputs.len());
        let mut preds = Vec::with_capacity(inputs.len());
        for b in 0..inputs.len() {
            let (y, tape) = self.decoder.forward(&end[b * sw..b * sw + d])?;
            preds.push(DenseMatrix::from_vec(1, y.len(), y)?);
            dec.push(tape);
        }
        Ok(VaeForward { enc, kl, traj, dec, preds })
    }

    fn loss_grad(&self, windows: &[&Window], noise: &[Vec<f64>], cfg: &TrainConfig) -> Result<BatchOutcome> {
        let inputs: Vec<&DenseMatrix> = windows.iter().map(|w| &w.inputs).collect();
        let labels: Vec<&DenseMatrix> = windows.iter().map(|w| &w.labels).collect();
        if labels.iter().any(|l| l.rows() != 1) {
            return Err(Error::Shape("one-step model needs single-row labels".into()));
        }
        let fwd = self.run(&inputs, noise, &ode_config(cfg))?;
        let (mse, dy) = mse_and_grad(&fwd.preds, &labels);
        let (sw, d) = (self.ode.state_width(), self.ode.latent());
        let batch = windows.len();

        let mut g_dec = vec![0.0; self.decoder.n_params()];
        let mut terminal = vec![0.0; batch * sw];
        for b in 0..batch {
            let dx = self.decoder.vjp(&fwd.dec[b], dy[b].row(0), &mut g_dec)?;
            terminal[b * sw..b * sw + d].copy_from_slice(&dx);
        }
        let adj = adjoint_gradient_jumps(&self.ode, &fwd.traj, &[(1.0, terminal)], &adjoint_config(cfg))?;
        let mut g_enc = vec![0.0; self.encoder.net.n_params()];
        let kl_scale = cfg.kl_weight / batch as f64;
        for b in 0..batch {
            self.encoder.vjp(&fwd.enc[b], &adj.initial_adjoint[b * sw..(b + 1) * sw], kl_scale, &mut g_enc)?;
        }
        let mut s0_sum = vec![0.0; sw];
        for s in fwd.traj.states[0].chunks(sw) {
            s0_sum.iter_mut().zip(s).for_each(|(a, v)| *a += v);
        }
        Ok(BatchOutcome {
            mse,
            kl: fwd.kl.iter().sum::<f64>() / batch as f64,
            grads: vec![g_enc, adj.grad_theta, vec![adj.grad_omega], vec![adj.grad_chi], g_dec],
            fwd_nfe: fwd.traj.nfe,
            bwd_nfe: adj.backward_nfe,
            adj_norm_t0: adj.trace.initial_norm(),
            adj_norm_t_end: adj.trace.terminal_norm(),
            s0_sum,
            max_h_norm: max_h_norm(&fwd.traj, &self.ode),
            max_h_drift: max_h_drift(&fwd.traj, &self.ode),
        })
    }
}
