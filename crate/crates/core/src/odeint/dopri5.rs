use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dopri5Config {
    pub rtol: f64,
    pub atol: f64,
    /// Magnitude of the first step; chosen automatically when `None`.
    pub initial_step: Option<f64>,
    pub safety: f64,
    pub min_scale: f64,
    pub max_scale: f64,
    pub max_steps: usize,
    /// Keep per-step interpolation coefficients for [`dense_eval`].
    pub dense: bool,
}

impl Default for Dopri5Config {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            initial_step: None,
            safety: 0.9,
            min_scale: 0.2,
            max_scale: 5.0,
            max_steps: 100_000,
            dense: true,
        }
    }
}

impl Dopri5Config {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.rtol) || !positive(self.atol) {
            return Err(Error::Config(format!("tolerances must be positive (rtol {}, atol {})", self.rtol, self.atol)));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) || !(0.0 < self.min_scale && self.min_scale <= 1.0 && self.max_scale >= 1.0) {
            return Err(Error::Config("invalid step controller parameters".into()));
        }
        if let Some(h) = self.initial_step {
            if !positive(h) {
                return Err(Error::Config(format!("initial step {h} must be positive")));
            }
        }
        Ok(())
    }
}

/// Accepted steps of a DOPRI5 solve with optional dense output.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Per step: `[y₀, Δy, hk₁ − Δy, Δy − hk₇ − (hk₁ − Δy), h Σ dᵢkᵢ]`.
    dense: Vec<[Vec<f64>; 5]>,
    pub nfe: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// States at the requested sample times, in request order.
    pub samples: Vec<(f64, Vec<f64>)>,
}

impl Trajectory {
    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t1(&self) -> f64 {
        *self.times.last().expect("non-empty trajectory")
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("non-empty trajectory")
    }

    pub fn has_dense_output(&self) -> bool {
        self.dense.len() + 1 == self.times.len()
    }
}

fn axpy_into(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..out.len() {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] = y[i] + h * s;
    }
}

fn check_finite(k: &[f64], t: f64, step: usize) -> Result<()> {
    if k.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Instability { step, detail: format!("non-finite vector field at t = {t}") })
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction) with the
/// Dormand–Prince 5(4) pair.
///
/// Every stage evaluation is counted in `nfe`, including the ones spent on
/// automatic step selection and rejected steps. With first-same-as-last
/// reuse an attempted step costs six evaluations, so
/// `nfe = 1 + [1 if the initial step is automatic] + 6 · (accepted + rejected)`.
pub fn dopri5_integrate<F>(f: F, y0: &[f64], t0: f64, t1: f64, cfg: &Dopri5Config) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    dopri5_sampled(f, y0, t0, t1, cfg, &[])
}

/// Like [`dopri5_integrate`], additionally recording the continuous
/// extension at `sample_times` (ordered in the integration direction) into
/// [`Trajectory::samples`] as the steps pass them, whether or not dense
/// output is retained.
pub fn dopri5_sampled<F>(f: F, y0: &[f64], t0: f64, t1: f64, cfg: &Dopri5Config, sample_times: &[f64]) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    if t0 == t1 || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Config(format!("integration interval [{t0}, {t1}] is empty or non-finite")));
    }
    if let Some(i) = y0.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("initial state entry {i}")));
    }
    let n = y0.len();
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let ahead = |a: f64, b: f64| dir * (b - a) > 0.0;
    if sample_times.iter().any(|&s| ahead(s, t0) || ahead(t1, s)) || sample_times.windows(2).any(|w| ahead(w[1], w[0])) {
        return Err(Error::Config("sample times must be ordered and inside the integration interval".into()));
    }
    let mut nfe = 0usize;

    let mut k1 = vec![0.0; n];
    f(t0, y0, &mut k1);
    nfe += 1;
    check_finite(&k1, t0, 0)?;

    let mut h = match cfg.initial_step {
        Some(h) => h.min(span),
        None => {
            nfe += 1;
            initial_step(&f, y0, &k1, t0, dir, span, cfg)?
        }
    };

    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![y0.to_vec()],
        dense: Vec::new(),
        nfe: 0,
        accepted: 0,
        rejected: 0,
        samples: Vec::with_capacity(sample_times.len()),
    };
    let mut pending = sample_times.iter().copied().peekable();
    while let Some(&s) = pending.peek() {
        if s != t0 {
            break;
        }
        traj.samples.push((s, y0.to_vec()));
        pending.next();
    }
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut ys = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut last_rejected = false;
    let mut attempts = 0usize;

    loop {
        let remaining = (t1 - t).abs();
        if remaining <= 0.0 {
            break;
        }
        if attempts >= cfg.max_steps {
            return Err(Error::StepBudget(cfg.max_steps));
        }
        let min_h = 16.0 * f64::EPSILON * t.abs().max(span);
        if h < min_h {
            return Err(Error::Integration { t, detail: format!("step size {h:.3e} underflowed") });
        }
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        let hs = dir * h;
        attempts += 1;

        axpy_into(&mut ys, &y, hs, &[(A21, &k1)]);
        f(t + C2 * hs, &ys, &mut k2);
        axpy_into(&mut ys, &y, hs, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * hs, &ys, &mut k3);
        axpy_into(&mut ys, &y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + C4 * hs, &ys, &mut k4);
        axpy_into(&mut ys, &y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        f(t + C5 * hs, &ys, &mut k5);
        axpy_into(&mut ys, &y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let t_new = if last { t1 } else { t + hs };
        f(t_new, &ys, &mut k6);
        axpy_into(&mut y_new, &y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        f(t_new, &y_new, &mut k7);
        nfe += 6;
        for k in [&k2, &k3, &k4, &k5, &k6, &k7] {
            check_finite(k, t, traj.accepted)?;
        }

        let mut err = 0.0;
        for i in 0..n {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = cfg.atol + cfg.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sk) * (e / sk);
        }
        let err = if n == 0 { 0.0 } else { (err / n as f64).sqrt() };
        if !err.is_finite() {
            return Err(Error::Instability { step: traj.accepted, detail: format!("non-finite error estimate at t = {t}") });
        }

        let grow = if err == 0.0 { cfg.max_scale } else { (cfg.safety * err.powf(-0.2)).clamp(cfg.min_scale, cfg.max_scale) };
        if err <= 1.0 {
            let wants_sample = pending.peek().is_some_and(|&s| !ahead(t_new, s));
            if cfg.dense || wants_sample {
                let mut r = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
                for i in 0..n {
                    let dy = y_new[i] - y[i];
                    let bspl = hs * k1[i] - dy;
                    r[0][i] = y[i];
                    r[1][i] = dy;
                    r[2][i] = bspl;
                    r[3][i] = dy - hs * k7[i] - bspl;
                    r[4][i] = hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                while let Some(&s) = pending.peek() {
                    if ahead(t_new, s) {
                        break;
                    }
                    let value = if s == t_new { y_new.clone() } else { interpolate(&r, (s - t) / hs) };
                    traj.samples.push((s, value));
                    pending.next();
                }
                if cfg.dense {
                    traj.dense.push(r);
                }
            }
            std::mem::swap(&mut k1, &mut k7);
            std::mem::swap(&mut y, &mut y_new);
            t = t_new;
            traj.times.push(t);
            traj.states.push(y.clone());
            traj.accepted += 1;
            if last {
                break;
            }
            h *= if last_rejected { grow.min(1.0) } else { grow };
            last_rejected = false;
        } else {
            traj.rejected += 1;
            last_rejected = true;
            h *= grow.min(1.0);
        }
    }
    traj.nfe = nfe;
    Ok(traj)
}

/// Automatic first step in the style of Hairer–Nørsett–Wanner; costs one
/// evaluation of `f`.
fn initial_step<F>(f: &F, y0: &[f64], f0: &[f64], t0: f64, dir: f64, span: f64, cfg: &Dopri5Config) -> Result<f64>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..n {
        let sk = cfg.atol + cfg.rtol * y0[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y0[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * (dny / dnf).sqrt() };
    h = h.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, k)| y + dir * h * k).collect();
    let mut f1 = vec![0.0; n];
    f(t0 + dir * h, &y1, &mut f1);
    check_finite(&f1, t0, 0)?;
    let mut der2 = 0.0;
    for i in 0..n {
        let sk = cfg.atol + cfg.rtol * y0[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
    Ok((100.0 * h).min(h1).min(span))
}

/// Evaluates the continuous extension at `t`. Accepted step times return
/// the stored states unchanged.
pub fn dense_eval(traj: &Trajectory, t: f64) -> Result<Vec<f64>> {
    let (t0, t1) = (traj.t0(), traj.t1());
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    if !(lo..=hi).contains(&t) {
        return Err(Error::OutOfRange { t, lo, hi });
    }
    let forward = t1 >= t0;
    let key = |s: f64| if forward { s } else { -s };
    let idx = traj.times.partition_point(|&s| key(s) < key(t));
    if idx < traj.times.len() && traj.times[idx] == t {
        return Ok(traj.states[idx].clone());
    }
    if !traj.has_dense_output() {
        return Err(Error::Contract("trajectory was integrated without dense output".into()));
    }
    // t lies strictly inside step idx-1
    let step = idx - 1;
    let (ta, tb) = (traj.times[step], traj.times[step + 1]);
    Ok(interpolate(&traj.dense[step], (t - ta) / (tb - ta)))
}

fn interpolate(r: &[Vec<f64>; 5], theta: f64) -> Vec<f64> {
    let theta1 = 1.0 - theta;
    (0..r[0].len())
        .map(|i| r[0][i] + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i]))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = -y[0];
    }

    #[test]
    fn zero_field_keeps_state() {
        let traj = dopri5_integrate(|_, _, d: &mut [f64]| d.fill(0.0), &[1.5, -2.0], 0.0, 1.0, &Dopri5Config::default()).unwrap();
        assert_eq!(traj.final_state(), &[1.5, -2.0]);
        assert_eq!(traj.rejected, 0);
        assert!(traj.accepted <= 12);
    }

    #[test]
    fn exponential_decay_and_dense_output() {
        let traj = dopri5_integrate(decay, &[1.0], 0.0, 1.0, &Dopri5Config::default()).unwrap();
        assert_eq!(traj.t1(), 1.0);
        assert!((traj.final_state()[0] - (-1.0f64).exp()).abs() <= 1e-7);
        assert!((dense_eval(&traj, 0.5).unwrap()[0] - (-0.5f64).exp()).abs() <= 1e-7);
        assert_eq!(dense_eval(&traj, 0.0).unwrap(), vec![1.0]);
        let mid = traj.times[traj.times.len() / 2];
        assert_eq!(dense_eval(&traj, mid).unwrap(), traj.states[traj.times.len() / 2]);
        assert!(matches!(dense_eval(&traj, 1.5), Err(Error::OutOfRange { .. })));
        assert_eq!(traj.nfe, 2 + 6 * (traj.accepted + traj.rejected));
        assert!(traj.nfe >= 6 * traj.accepted);
    }

    #[test]
    fn diagonal_linear_system() {
        let traj = dopri5_integrate(
            |_, y: &[f64], d: &mut [f64]| {
                d[0] = -y[0];
                d[1] = -100.0 * y[1];
            },
            &[1.0, 1.0],
            0.0,
            1.0,
            &Dopri5Config::default(),
        )
        .unwrap();
        let y = traj.final_state();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-6);
        assert!((y[1] - (-100.0f64).exp()).abs() < 1e-6);
        let slow = dopri5_integrate(decay, &[1.0], 0.0, 1.0, &Dopri5Config::default()).unwrap();
        assert!(traj.nfe > slow.nfe);
    }

    #[test]
    fn backward_round_trip() {
        let rot = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
        };
        let cfg = Dopri5Config::default();
        let fwd = dopri5_integrate(rot, &[1.0, 0.5], 0.0, 3.0, &cfg).unwrap();
        let back = dopri5_integrate(rot, fwd.final_state(), 3.0, 0.0, &cfg).unwrap();
        assert!(back.times.windows(2).all(|w| w[1] < w[0]));
        let y = back.final_state();
        let tol = 10.0 * cfg.rtol * (1.0f64 + 0.25).sqrt();
        assert!((y[0] - 1.0).abs() <= tol && (y[1] - 0.5).abs() <= tol);
        let mid = dense_eval(&back, 1.3).unwrap();
        assert!((mid[0] - (1.3f64.cos() + 0.5 * 1.3f64.sin())).abs() < 1e-7);
    }

    #[test]
    fn explicit_initial_step_skips_selection() {
        let cfg = Dopri5Config { initial_step: Some(0.1), ..Default::default() };
        let traj = dopri5_integrate(decay, &[1.0], 0.0, 1.0, &cfg).unwrap();
        assert_eq!(traj.nfe, 1 + 6 * (traj.accepted + traj.rejected));
    }

    #[test]
    fn failure_modes() {
        let cfg = Dopri5Config::default();
        assert!(dopri5_integrate(decay, &[1.0], 1.0, 1.0, &cfg).is_err());
        assert!(matches!(dopri5_integrate(decay, &[f64::NAN], 0.0, 1.0, &cfg), Err(Error::NonFinite(_))));
        let tight = Dopri5Config { max_steps: 3, ..Default::default() };
        assert!(matches!(dopri5_integrate(decay, &[1.0], 0.0, 100.0, &tight), Err(Error::StepBudget(3))));
        let blow = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = if y[0] > 2.0 { f64::NAN } else { y[0] };
        assert!(matches!(dopri5_integrate(blow, &[1.0], 0.0, 5.0, &cfg), Err(Error::Instability { .. })));
        // finite-time blow-up drives the step size to zero
        let sq = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = y[0] * y[0];
        let r = dopri5_integrate(sq, &[1.0], 0.0, 2.0, &cfg);
        assert!(r.as_ref().is_err_and(|e| e.is_instability()), "{r:?}");
        let bad = Dopri5Config { rtol: 0.0, ..Default::default() };
        assert!(matches!(dopri5_integrate(decay, &[1.0], 0.0, 1.0, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn samples_match_dense_output() {
        let cfg = Dopri5Config { dense: false, ..Default::default() };
        let times = [2.0, 1.5, 0.25, 0.0];
        let traj = dopri5_sampled(decay, &[1.0], 2.0, 0.0, &cfg, &times).unwrap();
        assert!(!traj.has_dense_output());
        assert_eq!(traj.samples.len(), 4);
        assert_eq!(traj.samples[0].1, vec![1.0]);
        for (t, y) in &traj.samples {
            assert!((y[0] - (2.0 - t).exp()).abs() < 1e-7, "{t}");
        }
        assert_eq!(traj.samples[3].1, traj.final_state());
        assert!(dopri5_sampled(decay, &[1.0], 0.0, 1.0, &cfg, &[0.5, 0.2]).is_err());
        assert!(dopri5_sampled(decay, &[1.0], 0.0, 1.0, &cfg, &[1.5]).is_err());
    }

    #[test]
    fn deterministic() {
        let a = dopri5_integrate(decay, &[0.3], 0.0, 2.0, &Dopri5Config::default()).unwrap();
        let b = dopri5_integrate(decay, &[0.3], 0.0, 2.0, &Dopri5Config::default()).unwrap();
        assert_eq!(a, b);
    }
}
