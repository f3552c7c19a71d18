use serde::{Deserialize, Serialize};

use super::model::OdeModel;
use crate::numkit::norm2;
use crate::odeint::{dense_eval, dopri5_integrate, dopri5_sampled, Dopri5Config, Trajectory};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjointConfig {
    pub ode: Dopri5Config,
    /// Number of uniform times at which `‖a(t)‖` is recorded.
    pub checkpoints: usize,
}

impl Default for AdjointConfig {
    fn default() -> Self {
        Self { ode: Dopri5Config { dense: false, ..Dopri5Config::default() }, checkpoints: 50 }
    }
}

impl AdjointConfig {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        let mut c = Self::default();
        c.ode.rtol = rtol;
        c.ode.atol = atol;
        c
    }
}

/// Norm of the `h`-block of the adjoint at increasing checkpoint times,
/// averaged over the states of a batch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdjointTrace {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

impl AdjointTrace {
    /// `‖a(t₀)‖`
    pub fn initial_norm(&self) -> f64 {
        self.norms.first().copied().unwrap_or(0.0)
    }

    /// `‖a(T)‖`
    pub fn terminal_norm(&self) -> f64 {
        self.norms.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdjointResult {
    pub grad_theta: Vec<f64>,
    pub grad_omega: f64,
    pub grad_chi: f64,
    /// `∂L/∂s(t₀)` for every state in the batch.
    pub initial_adjoint: Vec<f64>,
    pub trace: AdjointTrace,
    pub backward_nfe: usize,
}

/// Integrates a batch of states (stored back to back) forward in time with
/// dense output retained for the adjoint sweep.
pub fn forward_batch(model: &OdeModel, s0: &[f64], t0: f64, t1: f64, cfg: &Dopri5Config) -> Result<Trajectory> {
    let w = model.state_width();
    if s0.is_empty() || s0.len() % w != 0 {
        return Err(Error::Shape(format!("initial batch of width {} for states of width {w}", s0.len())));
    }
    let cfg = Dopri5Config { dense: true, ..cfg.clone() };
    dopri5_integrate(|_, s, d| model.rhs_batch(s, d).expect("validated batch width"), s0, t0, t1, &cfg)
}

/// Gradient of a loss that depends only on the terminal state.
pub fn adjoint_gradient(model: &OdeModel, traj: &Trajectory, loss_grad_terminal: &[f64], cfg: &AdjointConfig) -> Result<AdjointResult> {
    adjoint_gradient_jumps(model, traj, &[(traj.t1(), loss_grad_terminal.to_vec())], cfg)
}

/// Gradient of a loss that depends on the states at several observation
/// times. `observations` holds `(t_k, ∂L/∂s(t_k))` in increasing time order,
/// the last at the trajectory end; the adjoint jumps by each gradient as the
/// backward sweep passes its time.
///
/// The sweep integrates `[a, g_θ, g_ω, g_χ]` from `T` to `t₀` with
/// `a' = −aᵀ∂F/∂s` and `g' = −aᵀ∂F/∂(θ, ω, χ)`, reading `s(t)` from the
/// forward trajectory's dense output.
pub fn adjoint_gradient_jumps(
    model: &OdeModel,
    traj: &Trajectory,
    observations: &[(f64, Vec<f64>)],
    cfg: &AdjointConfig,
) -> Result<AdjointResult> {
    let (t0, t_end) = (traj.t0(), traj.t1());
    let width = traj.states[0].len();
    let w = model.state_width();
    if t_end <= t0 || !traj.has_dense_output() {
        return Err(Error::Contract("adjoint needs a forward-in-time trajectory with dense output".into()));
    }
    if width % w != 0 {
        return Err(Error::Contract(format!("trajectory width {width} is not a batch of {w}-wide states")));
    }
    match observations.last() {
        Some((t, _)) if *t == t_end => {}
        _ => return Err(Error::Contract("the last observation must sit at the trajectory end".into())),
    }
    for (k, (t, g)) in observations.iter().enumerate() {
        if g.len() != width {
            return Err(Error::Contract(format!("loss gradient of width {} for a trajectory of width {width}", g.len())));
        }
        if *t <= t0 || (k > 0 && *t <= observations[k - 1].0) {
            return Err(Error::Contract("observation times must increase inside (t0, T]".into()));
        }
    }

    let n_theta = model.net.n_params();
    let aug = width + n_theta + 2;
    let d = model.latent();
    let batch = width / w;
    let field = |t: f64, y: &[f64], dy: &mut [f64]| {
        let s = dense_eval(traj, t.clamp(t0, t_end)).expect("time clamped to the trajectory span");
        dy.fill(0.0);
        let (da, rest) = dy.split_at_mut(width);
        let (g_theta, g_scalar) = rest.split_at_mut(n_theta);
        for b in 0..batch {
            let r = b * w..(b + 1) * w;
            let vjp = model.field_vjp(&s[r.clone()], &y[r.clone()], g_theta).expect("validated widths");
            da[r].copy_from_slice(&vjp.state);
            g_scalar[0] += vjp.omega;
            g_scalar[1] += vjp.chi;
        }
        dy.iter_mut().for_each(|v| *v = -*v);
    };

    let n_check = cfg.checkpoints.max(2);
    let checkpoints: Vec<f64> = (0..n_check)
        .rev()
        .map(|i| if i == 0 { t0 } else if i == n_check - 1 { t_end } else { t0 + (t_end - t0) * i as f64 / (n_check - 1) as f64 })
        .collect();
    let mut next_check = 0;
    let mut samples: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n_check);

    let mut y = vec![0.0; aug];
    let mut nfe = 0;
    let mut hi = t_end;
    for k in (0..observations.len()).rev() {
        for (yi, gi) in y.iter_mut().zip(&observations[k].1) {
            *yi += gi;
        }
        let lo = if k == 0 { t0 } else { observations[k - 1].0 };
        let mut wanted = Vec::new();
        while next_check < checkpoints.len() && checkpoints[next_check] >= lo {
            wanted.push(checkpoints[next_check]);
            next_check += 1;
        }
        let piece = dopri5_sampled(field, &y, hi, lo, &cfg.ode, &wanted)?;
        nfe += piece.nfe;
        y = piece.final_state().to_vec();
        samples.extend(piece.samples);
        hi = lo;
    }

    let block_norm = |a: &[f64]| (0..batch).map(|b| norm2(&a[b * w..b * w + d])).sum::<f64>() / batch as f64;
    let mut trace = AdjointTrace::default();
    for (t, a) in samples.iter().rev() {
        trace.times.push(*t);
        trace.norms.push(block_norm(&a[..width]));
    }
    if trace.norms.iter().any(|n| !n.is_finite()) {
        return Err(Error::Instability { step: 0, detail: "non-finite adjoint norm".into() });
    }
    Ok(AdjointResult {
        grad_theta: y[width..width + n_theta].to_vec(),
        grad_omega: y[width + n_theta],
        grad_chi: y[width + n_theta + 1],
        initial_adjoint: y[..width].to_vec(),
        trace,
        backward_nfe: nfe,
    })
}
