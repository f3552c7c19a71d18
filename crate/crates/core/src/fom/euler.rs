use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::snapshot::{output_times, Field, SnapshotSet, Source};
use crate::numkit::DenseMatrix;
use crate::{Error, Result};

/// Ratio of specific heats for a diatomic gas.
pub const GAMMA_GAS: f64 = 1.4;

const GHOSTS: usize = 2;

/// Initial-condition parameters `(eta_u, eta_rho)` of the shock-entropy problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerParams {
    pub eta_u: f64,
    pub eta_rho: f64,
}

impl EulerParams {
    pub fn new(eta_u: f64, eta_rho: f64) -> Result<Self> {
        if !(2.0..=3.0).contains(&eta_u) {
            return Err(Error::Config(format!("eta_u = {eta_u} outside [2, 3]")));
        }
        if !(3.0..=4.0).contains(&eta_rho) {
            return Err(Error::Config(format!("eta_rho = {eta_rho} outside [3, 4]")));
        }
        Ok(Self { eta_u, eta_rho })
    }

    /// Uniform `rows x cols` grid over `[2,3] x [3,4]`, `eta_u` varying slowest.
    pub fn grid(n_u: usize, n_rho: usize) -> Vec<Self> {
        let lin = |k: usize, n: usize, lo: f64| if n == 1 { lo + 0.5 } else { lo + k as f64 / (n - 1) as f64 };
        let mut out = Vec::with_capacity(n_u * n_rho);
        for a in 0..n_u {
            for b in 0..n_rho {
                out.push(Self { eta_u: lin(a, n_u, 2.0), eta_rho: lin(b, n_rho, 3.0) });
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

impl Primitive {
    pub fn to_conserved(self) -> ConservedState {
        ConservedState {
            rho: self.rho,
            rho_u: self.rho * self.u,
            e: self.p / (GAMMA_GAS - 1.0) + 0.5 * self.rho * self.u * self.u,
        }
    }

    fn sound_speed(self) -> f64 {
        (GAMMA_GAS * self.p / self.rho).sqrt()
    }
}

/// Per-cell conserved variables `(rho, rho u, E)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservedState {
    pub rho: f64,
    pub rho_u: f64,
    pub e: f64,
}

impl ConservedState {
    pub fn velocity(&self) -> f64 {
        self.rho_u / self.rho
    }

    pub fn pressure(&self) -> f64 {
        (GAMMA_GAS - 1.0) * (self.e - 0.5 * self.rho_u * self.rho_u / self.rho)
    }

    pub fn to_primitive(self) -> Primitive {
        Primitive { rho: self.rho, u: self.velocity(), p: self.pressure() }
    }

    pub fn is_admissible(&self) -> bool {
        self.rho.is_finite() && self.rho > 0.0 && self.e.is_finite() && self.rho_u.is_finite() && self.pressure() > 0.0
    }

    /// Physical flux `(rho u, rho u^2 + p, (E + p) u)`.
    pub fn flux(&self) -> [f64; 3] {
        let u = self.velocity();
        let p = self.pressure();
        [self.rho_u, self.rho_u * u + p, (self.e + p) * u]
    }

    fn as_array(&self) -> [f64; 3] {
        [self.rho, self.rho_u, self.e]
    }
}

pub fn euler_initial_primitive(params: &EulerParams, x: f64) -> Primitive {
    if x < -4.0 {
        Primitive { rho: params.eta_rho, u: params.eta_u, p: 31.0 / 3.0 }
    } else {
        Primitive { rho: 1.0 + 0.2 * (PI * x).sin(), u: 0.0, p: 1.0 }
    }
}

pub fn euler_initial(params: &EulerParams, x: f64) -> ConservedState {
    euler_initial_primitive(params, x).to_conserved()
}

/// HLL approximate Riemann flux with Davis wave-speed estimates.
pub fn hll_flux(left: &ConservedState, right: &ConservedState) -> Result<[f64; 3]> {
    for (side, s) in [("left", left), ("right", right)] {
        if !s.is_admissible() {
            return Err(Error::Positivity(format!("{side} state {s:?}")));
        }
    }
    let (pl, pr) = (left.to_primitive(), right.to_primitive());
    let (cl, cr) = (pl.sound_speed(), pr.sound_speed());
    let sl = (pl.u - cl).min(pr.u - cr);
    let sr = (pl.u + cl).max(pr.u + cr);
    let fl = left.flux();
    if sl >= 0.0 {
        return Ok(fl);
    }
    let fr = right.flux();
    if sr <= 0.0 {
        return Ok(fr);
    }
    let (ul, ur) = (left.as_array(), right.as_array());
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = (sr * fl[k] - sl * fr[k] + sl * sr * (ur[k] - ul[k])) / (sr - sl);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerConfig {
    pub n_cells: usize,
    pub t_final: f64,
    pub n_snapshots: usize,
    pub cfl: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for EulerConfig {
    fn default() -> Self {
        Self { n_cells: 1000, t_final: 1.8, n_snapshots: 180, cfl: 0.4, x_min: -5.0, x_max: 5.0 }
    }
}

impl EulerConfig {
    pub fn desk() -> Self {
        Self { n_cells: 200, ..Self::default() }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells < 2 || !(self.dx() > 0.0) {
            return Err(Error::Config("Euler grid needs at least two cells".into()));
        }
        if !(self.t_final > 0.0) || self.n_snapshots < 2 {
            return Err(Error::Config("Euler run needs t_final > 0 and two snapshots".into()));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1), got {}", self.cfl)));
        }
        Ok(())
    }
}

pub fn euler_simulate(params: &EulerParams, cfg: &EulerConfig) -> Result<SnapshotSet> {
    let snaps = euler_simulate_with_initial(cfg, |x| euler_initial_primitive(params, x))?;
    Ok(snaps.with_params(*params))
}

/// Finite-volume march of the 1D Euler equations from arbitrary initial
/// data. Ghost cells hold the initial data at their centres for the whole
/// run. Rows store `rho | rho_u | E` per cell.
pub fn euler_simulate_with_initial(cfg: &EulerConfig, init: impl Fn(f64) -> Primitive) -> Result<SnapshotSet> {
    cfg.validate()?;
    let n = cfg.n_cells;
    let dx = cfg.dx();
    let total = n + 2 * GHOSTS;
    let x_at = |k: usize| cfg.x_min + (k as f64 - GHOSTS as f64 + 0.5) * dx;
    let mut u: Vec<ConservedState> = (0..total).map(|k| init(x_at(k)).to_conserved()).collect();
    if let Some(bad) = u.iter().position(|s| !s.is_admissible()) {
        return Err(Error::Positivity(format!("initial state at x = {}", x_at(bad))));
    }
    let times = output_times(cfg.t_final, cfg.n_snapshots);
    let mut data = Vec::with_capacity(cfg.n_snapshots * 3 * n);
    push_row(&mut data, &u[GHOSTS..GHOSTS + n]);

    let mut rhs = vec![[0.0; 3]; total];
    let mut stage1 = u.clone();
    let mut stage2 = u.clone();
    let mut t = 0.0;
    let mut step = 0;
    for &t_out in &times[1..] {
        while t < t_out {
            let smax = u[GHOSTS..GHOSTS + n]
                .iter()
                .map(|s| {
                    let p = s.to_primitive();
                    p.u.abs() + p.sound_speed()
                })
                .fold(0.0_f64, f64::max);
            let dt = (cfg.cfl * dx / smax).min(t_out - t);
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::Instability { step, detail: format!("time step {dt} at t = {t}") });
            }
            let stages: [(f64, f64); 3] = [(0.0, 1.0), (0.75, 0.25), (1.0 / 3.0, 2.0 / 3.0)];
            for (stage, &(a, b)) in stages.iter().enumerate() {
                let src = match stage {
                    0 => &u,
                    1 => &stage1,
                    _ => &stage2,
                };
                euler_rhs(src, dx, &mut rhs).map_err(|e| Error::Instability { step, detail: e.to_string() })?;
                let mut next = src.clone();
                for k in GHOSTS..GHOSTS + n {
                    let base = u[k].as_array();
                    let cur = src[k].as_array();
                    let mut v = [0.0; 3];
                    for c in 0..3 {
                        v[c] = a * base[c] + b * (cur[c] + dt * rhs[k][c]);
                    }
                    next[k] = ConservedState { rho: v[0], rho_u: v[1], e: v[2] };
                    if !next[k].is_admissible() {
                        return Err(Error::Instability {
                            step,
                            detail: format!("inadmissible state {:?} at x = {}", next[k], x_at(k)),
                        });
                    }
                }
                match stage {
                    0 => stage1 = next,
                    1 => stage2 = next,
                    _ => u = next,
                }
            }
            step += 1;
            t = if dt == t_out - t { t_out } else { t + dt };
        }
        push_row(&mut data, &u[GHOSTS..GHOSTS + n]);
    }
    let matrix = DenseMatrix::from_vec(cfg.n_snapshots, 3 * n, data)?;
    SnapshotSet::new(
        times,
        matrix,
        vec![Field::new("rho", n), Field::new("rho_u", n), Field::new("E", n)],
        Source::Euler,
    )
}

fn push_row(data: &mut Vec<f64>, cells: &[ConservedState]) {
    data.extend(cells.iter().map(|s| s.rho));
    data.extend(cells.iter().map(|s| s.rho_u));
    data.extend(cells.iter().map(|s| s.e));
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// MUSCL-minmod reconstruction on primitive variables with HLL fluxes.
/// Falls back to first order at a face whenever a reconstructed state is
/// inadmissible. Ghost-cell entries of `out` are left at zero.
fn euler_rhs(u: &[ConservedState], dx: f64, out: &mut [[f64; 3]]) -> Result<()> {
    let total = u.len();
    let prim: Vec<Primitive> = u.iter().map(|s| s.to_primitive()).collect();
    let slope = |k: usize| -> [f64; 3] {
        if k == 0 || k + 1 == total {
            return [0.0; 3];
        }
        let (a, b, c) = (prim[k - 1], prim[k], prim[k + 1]);
        [minmod(b.rho - a.rho, c.rho - b.rho), minmod(b.u - a.u, c.u - b.u), minmod(b.p - a.p, c.p - b.p)]
    };
    let face_state = |k: usize, sign: f64| -> ConservedState {
        let s = slope(k);
        let p = prim[k];
        Primitive { rho: p.rho + sign * 0.5 * s[0], u: p.u + sign * 0.5 * s[1], p: p.p + sign * 0.5 * s[2] }
            .to_conserved()
    };
    let mut fluxes = vec![[0.0; 3]; total - 1];
    for f in (GHOSTS - 1)..(total - GHOSTS) {
        // face between cells f and f + 1
        let mut l = face_state(f, 1.0);
        let mut r = face_state(f + 1, -1.0);
        if !l.is_admissible() || !r.is_admissible() {
            l = u[f];
            r = u[f + 1];
        }
        fluxes[f] = hll_flux(&l, &r)?;
    }
    for row in out.iter_mut() {
        *row = [0.0; 3];
    }
    for k in GHOSTS..(total - GHOSTS) {
        for c in 0..3 {
            out[k][c] = -(fluxes[k][c] - fluxes[k - 1][c]) / dx;
        }
    }
    Ok(())
}
