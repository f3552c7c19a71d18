use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::snapshot::{output_times, Field, SnapshotSet, Source};
use crate::numkit::DenseMatrix;
use crate::{Error, Result};

const GHOSTS: usize = 3;
const WENO_EPS: f64 = 1e-6;

/// Uniform Cartesian grid. The default extent is the KPP domain
/// `[-2, 2] x [-5/2, 3/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Grid2D {
    pub fn kpp(nx: usize, ny: usize) -> Self {
        Self { nx, ny, x_min: -2.0, x_max: 2.0, y_min: -2.5, y_max: 1.5 }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn y_center(&self, j: usize) -> f64 {
        self.y_min + (j as f64 + 0.5) * self.dy()
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || !(self.dx() > 0.0) || !(self.dy() > 0.0) {
            return Err(Error::Config(format!("degenerate grid {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    Weno5,
    FirstOrder,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KppConfig {
    pub grid: Grid2D,
    pub t_final: f64,
    pub n_snapshots: usize,
    pub cfl: f64,
    pub reconstruction: Reconstruction,
}

impl Default for KppConfig {
    fn default() -> Self {
        Self {
            grid: Grid2D::kpp(50, 50),
            t_final: 10.0,
            n_snapshots: 1250,
            cfl: 0.4,
            reconstruction: Reconstruction::Weno5,
        }
    }
}

impl KppConfig {
    /// 32x32 grid, 300 snapshots over the same horizon.
    pub fn desk() -> Self {
        Self { grid: Grid2D::kpp(32, 32), n_snapshots: 300, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.t_final > 0.0) {
            return Err(Error::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.n_snapshots < 2 {
            return Err(Error::Config("at least two snapshots are required".into()));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1), got {}", self.cfl)));
        }
        Ok(())
    }
}

/// The non-convex KPP flux `(sin u, cos u)`.
pub fn kpp_flux(u: f64) -> (f64, f64) {
    (u.sin(), u.cos())
}

pub fn kpp_initial(x: f64, y: f64) -> f64 {
    if x * x + y * y < 1.0 {
        14.0 * PI / 4.0
    } else {
        PI / 4.0
    }
}

/// Fifth-order WENO (Jiang–Shu) value at the right face of the middle cell
/// of `v`, biased by the usual smoothness indicators.
pub fn weno5_reconstruct(v: &[f64; 5]) -> f64 {
    let [v0, v1, v2, v3, v4] = *v;
    if v0 == v2 && v1 == v2 && v3 == v2 && v4 == v2 {
        return v2;
    }
    let b0 = 13.0 / 12.0 * (v0 - 2.0 * v1 + v2).powi(2) + 0.25 * (v0 - 4.0 * v1 + 3.0 * v2).powi(2);
    let b1 = 13.0 / 12.0 * (v1 - 2.0 * v2 + v3).powi(2) + 0.25 * (v1 - v3).powi(2);
    let b2 = 13.0 / 12.0 * (v2 - 2.0 * v3 + v4).powi(2) + 0.25 * (3.0 * v2 - 4.0 * v3 + v4).powi(2);
    let a0 = 0.1 / (WENO_EPS + b0).powi(2);
    let a1 = 0.6 / (WENO_EPS + b1).powi(2);
    let a2 = 0.3 / (WENO_EPS + b2).powi(2);
    let q0 = (2.0 * v0 - 7.0 * v1 + 11.0 * v2) / 6.0;
    let q1 = (-v1 + 5.0 * v2 + 2.0 * v3) / 6.0;
    let q2 = (2.0 * v2 + 5.0 * v3 - v4) / 6.0;
    (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)
}

/// Local Lax–Friedrichs flux for a scalar flux function.
pub fn llf_flux(ul: f64, ur: f64, alpha_max: f64, flux: impl Fn(f64) -> f64) -> f64 {
    0.5 * (flux(ul) + flux(ur)) - 0.5 * alpha_max * (ur - ul)
}

pub fn kpp_simulate(cfg: &KppConfig) -> Result<SnapshotSet> {
    kpp_simulate_with_initial(cfg, kpp_initial)
}

/// Runs the KPP finite-volume solver from arbitrary initial data.
///
/// Dimension-by-dimension reconstruction, LLF fluxes with the global wave
/// speed bound 1, zero-gradient ghost cells, and SSP-RK3 in time. The step
/// is shortened to land exactly on each output time.
pub fn kpp_simulate_with_initial(cfg: &KppConfig, init: impl Fn(f64, f64) -> f64) -> Result<SnapshotSet> {
    cfg.validate()?;
    let g = cfg.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mut u: Vec<f64> = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .map(|(i, j)| init(g.x_center(i), g.y_center(j)))
        .collect();

    let times = output_times(cfg.t_final, cfg.n_snapshots);
    let mut data = Vec::with_capacity(cfg.n_snapshots * nx * ny);
    data.extend_from_slice(&u);
    let dt_max = cfg.cfl * g.dx().min(g.dy());
    let mut solver = KppRhs::new(g, cfg.reconstruction);
    let mut t = 0.0;
    let mut step = 0;
    let mut stage1 = vec![0.0; u.len()];
    let mut stage2 = vec![0.0; u.len()];
    let mut rhs = vec![0.0; u.len()];
    for &t_out in &times[1..] {
        while t < t_out {
            let dt = dt_max.min(t_out - t);
            if !(dt > 0.0) {
                return Err(Error::Config(format!("non-positive time step {dt} at t = {t}")));
            }
            solver.eval(&u, &mut rhs);
            for k in 0..u.len() {
                stage1[k] = u[k] + dt * rhs[k];
            }
            solver.eval(&stage1, &mut rhs);
            for k in 0..u.len() {
                stage2[k] = 0.75 * u[k] + 0.25 * (stage1[k] + dt * rhs[k]);
            }
            solver.eval(&stage2, &mut rhs);
            for k in 0..u.len() {
                u[k] = u[k] / 3.0 + 2.0 / 3.0 * (stage2[k] + dt * rhs[k]);
            }
            step += 1;
            if u.iter().any(|v| !v.is_finite()) {
                let max = u.iter().filter(|v| v.is_finite()).fold(0.0_f64, |m, v| m.max(v.abs()));
                return Err(Error::Instability { step, detail: format!("non-finite KPP state, max finite |u| = {max}") });
            }
            t = if dt == t_out - t { t_out } else { t + dt };
        }
        data.extend_from_slice(&u);
    }
    let matrix = DenseMatrix::from_vec(cfg.n_snapshots, nx * ny, data)?;
    SnapshotSet::new(times, matrix, vec![Field::new("u", nx * ny)], Source::Kpp)
}

/// Semi-discrete operator `-∂x f(u) - ∂y g(u)` with reusable line buffers.
struct KppRhs {
    grid: Grid2D,
    recon: Reconstruction,
    line: Vec<f64>,
    flux: Vec<f64>,
}

impl KppRhs {
    fn new(grid: Grid2D, recon: Reconstruction) -> Self {
        let n = grid.nx.max(grid.ny);
        Self { grid, recon, line: vec![0.0; n + 2 * GHOSTS], flux: vec![0.0; n + 1] }
    }

    fn eval(&mut self, u: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (dx, dy) = (self.grid.dx(), self.grid.dy());
        for j in 0..ny {
            self.sweep(nx, |i| u[j * nx + i], f64::sin);
            for i in 0..nx {
                out[j * nx + i] = -(self.flux[i + 1] - self.flux[i]) / dx;
            }
        }
        for i in 0..nx {
            self.sweep(ny, |j| u[j * nx + i], f64::cos);
            for j in 0..ny {
                out[j * nx + i] -= (self.flux[j + 1] - self.flux[j]) / dy;
            }
        }
    }

    /// Fills `self.flux[0..=n]` with interface fluxes along one grid line.
    fn sweep(&mut self, n: usize, cell: impl Fn(usize) -> f64, f: fn(f64) -> f64) {
        for k in 0..(n + 2 * GHOSTS) {
            let idx = k.saturating_sub(GHOSTS).min(n - 1);
            self.line[k] = cell(idx);
        }
        let p = &self.line;
        for face in 0..=n {
            // face between padded cells a and a + 1
            let a = face + GHOSTS - 1;
            let (ul, ur) = match self.recon {
                Reconstruction::Weno5 => (
                    weno5_reconstruct(&[p[a - 2], p[a - 1], p[a], p[a + 1], p[a + 2]]),
                    weno5_reconstruct(&[p[a + 3], p[a + 2], p[a + 1], p[a], p[a - 1]]),
                ),
                Reconstruction::FirstOrder => (p[a], p[a + 1]),
            };
            self.flux[face] = llf_flux(ul, ur, 1.0, f);
        }
    }
}

/// Total variation of a KPP field over both grid directions.
pub fn total_variation(u: &[f64], grid: &Grid2D) -> f64 {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut tv = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                tv += (u[j * nx + i + 1] - u[j * nx + i]).abs() * grid.dy();
            }
            if j + 1 < ny {
                tv += (u[(j + 1) * nx + i] - u[j * nx + i]).abs() * grid.dx();
            }
        }
    }
    tv
}
