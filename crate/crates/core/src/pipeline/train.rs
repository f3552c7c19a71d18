use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{Task, TrainConfig};
use super::models::{ode_config, Network};
use super::normalize::Normalizer;
use super::tasks::{prepare, PreparedData};
use super::windows::Window;
use crate::neural::{adamw_step, clip_global_norm, AdamWConfig, AdamWState, ParamBlock};
use crate::numkit::DenseMatrix;
use crate::odeint::{jacobian_fd, spectrum_stiffness};
use crate::{Error, Result};

/// Metrics of one training epoch. NFE counts cover the training sweeps only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Window-weighted mean of the batch losses seen during the epoch.
    pub train_mse: f64,
    /// Validation loss after the epoch's last update.
    pub val_mse: f64,
    pub fwd_nfe: usize,
    pub bwd_nfe: usize,
    /// Stiffness ratio of the vector field's Jacobian at the epoch's mean
    /// initial state.
    pub stiffness: f64,
    pub adj_norm_t0: f64,
    pub adj_norm_t_end: f64,
    /// Largest `‖h‖` seen on any forward trajectory of the epoch.
    pub max_h_norm: f64,
    /// Largest `‖h(t) − h(t₀)‖` on any forward trajectory of the epoch.
    pub max_h_drift: f64,
    pub kl: f64,
}

impl EpochRecord {
    pub fn is_finite(&self) -> bool {
        [self.train_mse, self.val_mse, self.stiffness, self.adj_norm_t0, self.adj_norm_t_end, self.max_h_norm, self.max_h_drift, self.kl]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// A trained network with everything needed to apply it to raw coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub network: Network,
    pub normalizer: Normalizer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub seed: u64,
    pub records: Vec<EpochRecord>,
    pub model: TrainedModel,
}

impl TrainRun {
    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

fn mse(preds: &[DenseMatrix], windows: &[&Window]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for (p, w) in preds.iter().zip(windows) {
        sum += p.as_slice().iter().zip(w.labels.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        n += p.as_slice().len();
    }
    sum / n as f64
}

fn divergence(epoch: usize, err: Error) -> Error {
    match err {
        Error::GradientExplosion(block) => Error::Divergence { epoch, detail: format!("non-finite gradient in block '{block}'") },
        Error::NonFinite(what) => Error::Divergence { epoch, detail: format!("non-finite {what}") },
        other => other,
    }
}

/// Trains a fresh network on prepared windows, reporting each epoch to
/// `observer` as soon as it completes (so a divergent run still leaves its
/// history behind).
pub fn train_observed(data: &PreparedData, cfg: &TrainConfig, observer: &mut dyn FnMut(&EpochRecord)) -> Result<TrainRun> {
    cfg.validate()?;
    let ds = &data.dataset;
    if ds.train.is_empty() || ds.val.is_empty() {
        return Err(Error::InsufficientData("training needs non-empty training and validation windows".into()));
    }
    if ds.width() != cfg.r || (ds.seq_in, ds.seq_out) != (cfg.seq_in, cfg.seq_out) {
        return Err(Error::Shape(format!(
            "windows are {}→{} over {} modes, config expects {}→{} over {}",
            ds.seq_in, ds.seq_out, ds.width(), cfg.seq_in, cfg.seq_out, cfg.r
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Network::new(cfg, &mut rng)?;
    let sizes: Vec<usize> = net.blocks().iter().map(|b| b.len()).collect();
    let names = net.block_names();
    let mut adam = AdamWState::new(AdamWConfig::new(cfg.lr).with_weight_decay(cfg.weight_decay), &sizes);
    let ode_cfg = ode_config(cfg);
    let val: Vec<&Window> = ds.val.iter().collect();
    let val_inputs: Vec<&DenseMatrix> = val.iter().map(|w| &w.inputs).collect();
    let n_train = ds.train.len();
    let batch = cfg.batch_size.unwrap_or(n_train).min(n_train);
    let sw = net.ode().state_width();

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n_train).collect();
    for epoch in 1..=cfg.epochs {
        if batch < n_train {
            order.shuffle(&mut rng);
        }
        let mut rec = EpochRecord {
            epoch,
            train_mse: 0.0,
            val_mse: 0.0,
            fwd_nfe: 0,
            bwd_nfe: 0,
            stiffness: 0.0,
            adj_norm_t0: 0.0,
            adj_norm_t_end: 0.0,
            max_h_norm: 0.0,
            max_h_drift: 0.0,
            kl: 0.0,
        };
        let mut s0_mean = vec![0.0; sw];
        let n_batches = n_train.div_ceil(batch);
        for ids in order.chunks(batch) {
            let windows: Vec<&Window> = ids.iter().map(|&i| &ds.train[i]).collect();
            let noise: Option<Vec<Vec<f64>>> = (cfg.task.is_vae() && cfg.vae_noise)
                .then(|| ids.iter().map(|_| (0..sw).map(|_| StandardNormal.sample(&mut rng)).collect()).collect());
            let out = net.loss_grad(&windows, ids, noise.as_deref(), cfg).map_err(|e| divergence(epoch, e))?;
            let objective = out.mse + cfg.kl_weight * out.kl;
            if !objective.is_finite() {
                return Err(Error::Divergence { epoch, detail: format!("loss is {objective} on windows {ids:?}") });
            }
            let mut grads = out.grads;
            if let Some(max) = cfg.grad_clip {
                let mut views: Vec<&mut [f64]> = grads.iter_mut().map(|g| g.as_mut_slice()).collect();
                clip_global_norm(&mut views, max);
            }
            let mut blocks: Vec<ParamBlock<'_>> = net
                .blocks_mut()
                .into_iter()
                .zip(&grads)
                .zip(&names)
                .map(|((params, grads), name)| ParamBlock { name, params, grads })
                .collect();
            adamw_step(&mut blocks, &mut adam).map_err(|e| divergence(epoch, e))?;

            let share = ids.len() as f64 / n_train as f64;
            rec.train_mse += share * out.mse;
            rec.kl += share * out.kl;
            rec.fwd_nfe += out.fwd_nfe;
            rec.bwd_nfe += out.bwd_nfe;
            rec.adj_norm_t0 += out.adj_norm_t0 / n_batches as f64;
            rec.adj_norm_t_end += out.adj_norm_t_end / n_batches as f64;
            rec.max_h_norm = rec.max_h_norm.max(out.max_h_norm);
            rec.max_h_drift = rec.max_h_drift.max(out.max_h_drift);
            s0_mean.iter_mut().zip(&out.s0_sum).for_each(|(m, s)| *m += s / n_train as f64);
        }
        let (preds, _) = net.predict(&val_inputs, ds.seq_out, &ode_cfg)?;
        rec.val_mse = mse(&preds, &val);
        let ode = net.ode();
        let jac = jacobian_fd(|_, s, d| ode.rhs(s, d).expect("state width fixed by the model"), &s0_mean, 0.0, None)?;
        rec.stiffness = spectrum_stiffness(&jac)?.ratio;
        if !rec.is_finite() {
            observer(&rec);
            records.push(rec);
            return Err(Error::Divergence { epoch, detail: "non-finite epoch metrics".into() });
        }
        log::info!(
            "{} {} epoch {epoch}: train {:.3e} val {:.3e} nfe {}/{}",
            cfg.task,
            cfg.model,
            rec.train_mse,
            rec.val_mse,
            rec.fwd_nfe,
            rec.bwd_nfe
        );
        observer(&rec);
        records.push(rec);
    }
    Ok(TrainRun {
        seed: cfg.seed,
        records,
        model: TrainedModel { config: cfg.clone(), network: net, normalizer: data.normalizer.clone() },
    })
}

/// Seq2seq training on prepared windows.
pub fn train_seq2seq(data: &PreparedData, cfg: &TrainConfig) -> Result<TrainRun> {
    if cfg.task.is_vae() {
        return Err(Error::Config(format!("{} uses the one-step VAE model", cfg.task)));
    }
    train_observed(data, cfg, &mut |_| {})
}

/// One-step VAE training on the steady phase of a coefficient series.
pub fn train_vae_onestep(coeffs: &DenseMatrix, cfg: &TrainConfig) -> Result<TrainRun> {
    if cfg.task != Task::VksSteadyVae {
        return Err(Error::Config(format!("the one-step VAE pipeline serves {}, not {}", Task::VksSteadyVae, cfg.task)));
    }
    let data = prepare(std::slice::from_ref(coeffs), cfg, 0)?;
    train_observed(&data, cfg, &mut |_| {})
}

impl TrainedModel {
    pub fn task(&self) -> Task {
        self.config.task
    }

    /// The next `seq_out` coefficient rows after a raw `seq_in × r` window.
    pub fn predict_window(&self, inputs: &DenseMatrix) -> Result<DenseMatrix> {
        let z = self.predict_normalized(&self.normalizer.apply(inputs))?;
        Ok(self.normalizer.invert(&z))
    }

    fn predict_normalized(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        let cfg = &self.config;
        if z.shape() != (cfg.seq_in, cfg.r) {
            return Err(Error::Shape(format!("window {:?}, model takes {}×{}", z.shape(), cfg.seq_in, cfg.r)));
        }
        let (mut preds, _) = self.network.predict(&[z], cfg.seq_out, &ode_config(cfg))?;
        Ok(preds.remove(0))
    }
}

/// Autoregressive continuation of a raw seed window: each prediction is
/// appended to the history and the latest `seq_in` rows are fed back in.
pub fn rollout(model: &TrainedModel, seed_window: &DenseMatrix, horizon: usize) -> Result<DenseMatrix> {
    if horizon == 0 {
        return Err(Error::Config("rollout horizon must be at least 1".into()));
    }
    let (seq_in, r) = (model.config.seq_in, model.config.r);
    if seed_window.shape() != (seq_in, r) {
        return Err(Error::Shape(format!("seed window {:?}, model takes {seq_in}×{r}", seed_window.shape())));
    }
    let mut history: Vec<Vec<f64>> = {
        let z = model.normalizer.apply(seed_window);
        (0..seq_in).map(|i| z.row(i).to_vec()).collect()
    };
    let mut out = Vec::with_capacity(horizon * r);
    let mut produced = 0;
    while produced < horizon {
        let window = DenseMatrix::from_rows(&history[history.len() - seq_in..])?;
        let next = model.predict_normalized(&window)?;
        for i in 0..next.rows() {
            if produced < horizon {
                out.extend_from_slice(next.row(i));
                produced += 1;
            }
            history.push(next.row(i).to_vec());
        }
    }
    Ok(model.normalizer.invert(&DenseMatrix::from_vec(horizon, r, out)?))
}

/// Mean squared error overall and per mode (column).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub per_mode: Vec<f64>,
}

pub fn evaluate(prediction: &DenseMatrix, truth: &DenseMatrix) -> Result<Metrics> {
    if prediction.shape() != truth.shape() {
        return Err(Error::Shape(format!("prediction {:?} vs truth {:?}", prediction.shape(), truth.shape())));
    }
    let (n, r) = truth.shape();
    if n == 0 || r == 0 {
        return Err(Error::Shape("cannot evaluate empty arrays".into()));
    }
    let mut per_mode = vec![0.0; r];
    for i in 0..n {
        for (j, (p, t)) in prediction.row(i).iter().zip(truth.row(i)).enumerate() {
            per_mode[j] += (p - t) * (p - t);
        }
    }
    let mse = per_mode.iter().sum::<f64>() / (n * r) as f64;
    per_mode.iter_mut().for_each(|v| *v /= n as f64);
    Ok(Metrics { mse, per_mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ModelKind;
    use crate::pipeline::config::Profile;
    use crate::pipeline::windows::make_windows;

    fn tiny(task: Task, kind: ModelKind) -> TrainConfig {
        TrainConfig {
            r: 2,
            latent: 2,
            hidden: 8,
            layers: 2,
            rnn_units: 4,
            encoder_layers: 2,
            encoder_units: 6,
            decoder_layers: 2,
            decoder_units: 6,
            seq_in: if task.is_vae() { 1 } else { 3 },
            seq_out: 1,
            epochs: 5,
            rtol: 1e-6,
            atol: 1e-8,
            ..TrainConfig::preset(task, kind, Profile::Desk)
        }
    }

    fn oscillation(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, 2, |i, j| {
            let t = 0.3 * i as f64;
            if j == 0 { t.cos() } else { 0.5 * t.sin() }
        })
    }

    fn data(cfg: &TrainConfig, n: usize) -> PreparedData {
        let c = oscillation(n);
        let ds = make_windows(&c, cfg.seq_in, cfg.seq_out, 1, n * 3 / 4).unwrap();
        PreparedData { dataset: ds, normalizer: Normalizer::identity(2) }
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = tiny(Task::KppSeq, ModelKind::Hbnode);
        let d = data(&cfg, 30);
        let a = train_seq2seq(&d, &cfg).unwrap();
        let b = train_seq2seq(&d, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 5);
        assert!(a.records.iter().all(|r| r.is_finite()));
    }

    #[test]
    fn minibatches_shuffle_deterministically() {
        let mut cfg = tiny(Task::KppSeq, ModelKind::Node);
        cfg.batch_size = Some(4);
        cfg.epochs = 2;
        let d = data(&cfg, 24);
        assert_eq!(train_seq2seq(&d, &cfg).unwrap(), train_seq2seq(&d, &cfg).unwrap());
    }

    #[test]
    fn nfe_accounting_reconciles_with_the_integrator() {
        let cfg = TrainConfig { epochs: 1, ..tiny(Task::KppSeq, ModelKind::Ghbnode) };
        let d = data(&cfg, 20);
        let run = train_seq2seq(&d, &cfg).unwrap();
        // replay the single full-batch step from the same initial network
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let net = Network::new(&cfg, &mut rng).unwrap();
        let ws: Vec<&Window> = d.dataset.train.iter().collect();
        let ids: Vec<usize> = (0..ws.len()).collect();
        let out = net.loss_grad(&ws, &ids, None, &cfg).unwrap();
        assert_eq!(run.records[0].fwd_nfe, out.fwd_nfe);
        assert_eq!(run.records[0].bwd_nfe, out.bwd_nfe);
        assert_eq!(run.records[0].train_mse, out.mse);
    }

    #[test]
    fn vae_variant_trains() {
        let cfg = tiny(Task::VksSteadyVae, ModelKind::Hbnode);
        let d = data(&cfg, 24);
        let run = train_observed(&d, &cfg, &mut |_| {}).unwrap();
        assert_eq!(run.records.len(), 5);
        assert!(run.records.iter().all(|r| r.is_finite() && r.kl >= 0.0));
        assert!(train_seq2seq(&d, &cfg).is_err());
    }

    #[test]
    fn rollout_of_one_step_equals_a_single_prediction() {
        let cfg = tiny(Task::KppSeq, ModelKind::Hbnode);
        let d = data(&cfg, 24);
        let mut run = train_seq2seq(&d, &cfg).unwrap();
        run.model.normalizer = Normalizer { mean: vec![0.1, -0.2], std: vec![2.0, 0.5] };
        let seed = oscillation(3);
        let one = rollout(&run.model, &seed, 1).unwrap();
        assert_eq!(one, run.model.predict_window(&seed).unwrap());
        let many = rollout(&run.model, &seed, 4).unwrap();
        assert_eq!(many.shape(), (4, 2));
        assert_eq!(many.row(0), one.row(0));
        assert!(rollout(&run.model, &seed, 0).is_err());
    }

    #[test]
    fn evaluate_basics() {
        let a = oscillation(5);
        assert_eq!(evaluate(&a, &a).unwrap().mse, 0.0);
        let b = DenseMatrix::from_fn(5, 2, |i, j| a[(i, j)] + 1.0);
        let m = evaluate(&b, &a).unwrap();
        assert!((m.mse - 1.0).abs() < 1e-15 && m.per_mode.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(evaluate(&a, &oscillation(4)).is_err());
    }
}
