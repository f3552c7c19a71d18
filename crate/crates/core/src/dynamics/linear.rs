use num_complex::Complex64;

use crate::numkit::{eigvals, DenseMatrix};
use crate::odeint::spectrum_stiffness;
use crate::{Error, Result};

/// Heavy-ball companion `[[0, I], [A, −γI]]` of the linear field `h' = A h`.
pub fn hb_companion(a: &DenseMatrix, gamma: f64) -> Result<DenseMatrix> {
    if !a.is_square() {
        return Err(Error::Shape(format!("companion of a {:?} matrix", a.shape())));
    }
    let n = a.rows();
    let mut b = DenseMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        b[(i, n + i)] = 1.0;
        b[(n + i, n + i)] = -gamma;
        for j in 0..n {
            b[(n + i, j)] = a[(i, j)];
        }
    }
    Ok(b)
}

/// `|λ|max / |λ|min`, ignoring magnitudes below `1e-10 |λ|max`.
pub fn spectral_ratio(m: &DenseMatrix) -> Result<f64> {
    let s = spectrum_stiffness(m)?;
    if s.undefined {
        return Err(Error::DegenerateSpectrum("every eigenvalue is zero".into()));
    }
    Ok(s.ratio)
}

/// Assembles `−M = (T − t)·[[0, S], [J − ξI, −γI]]` for a constant integrand
/// (`S = ∂σ/∂m`, `J = ∂f/∂h`), and returns the sums of its eigenvalues paired
/// greedily around the target `(t − T)γ`.
pub fn pairing_check(jac_f: &DenseMatrix, gamma: f64, xi: f64, sigma_jac: &DenseMatrix, t_minus_t_end: f64) -> Result<Vec<Complex64>> {
    if !jac_f.is_square() || jac_f.shape() != sigma_jac.shape() {
        return Err(Error::Shape(format!("blocks {:?} and {:?} do not form an even square system", jac_f.shape(), sigma_jac.shape())));
    }
    let n = jac_f.rows();
    let scale = -t_minus_t_end;
    let mut m = DenseMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(n + i, n + i)] = -gamma * scale;
        for j in 0..n {
            m[(i, n + j)] = sigma_jac[(i, j)] * scale;
            let shift = if i == j { xi } else { 0.0 };
            m[(n + i, j)] = (jac_f[(i, j)] - shift) * scale;
        }
    }
    let values = eigvals(&m)?;
    let target = Complex64::new(t_minus_t_end * gamma, 0.0);
    let mut free: Vec<bool> = vec![true; values.len()];
    let mut sums = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..values.len() {
            if !free[i] {
                continue;
            }
            for j in (i + 1)..values.len() {
                if !free[j] {
                    continue;
                }
                let dev = (values[i] + values[j] - target).norm();
                if best.is_none_or(|(_, _, d)| dev < d) {
                    best = Some((i, j, dev));
                }
            }
        }
        let (i, j, _) = best.expect("an even number of eigenvalues");
        free[i] = false;
        free[j] = false;
        sums.push(values[i] + values[j]);
    }
    Ok(sums)
}
