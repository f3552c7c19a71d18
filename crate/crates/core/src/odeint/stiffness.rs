use serde::{Deserialize, Serialize};

use crate::numkit::{eig_magnitudes, DenseMatrix};
use crate::{Error, Result};

/// Central-difference Jacobian `∂f/∂y` at `(t, y)`. Without `eps`, the
/// perturbation of component `j` is `√ε_mach · max(1, |y_j|)`.
pub fn jacobian_fd<F>(f: F, y: &[f64], t: f64, eps: Option<f64>) -> Result<DenseMatrix>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if let Some(e) = eps {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::Config(format!("finite-difference step {e} must be positive")));
        }
    }
    let n = y.len();
    let mut jac = DenseMatrix::zeros(n, n);
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        let h = eps.unwrap_or_else(|| f64::EPSILON.sqrt() * y[j].abs().max(1.0));
        yp[j] = y[j] + h;
        f(t, &yp, &mut fp);
        yp[j] = y[j] - h;
        f(t, &yp, &mut fm);
        yp[j] = y[j];
        for i in 0..n {
            let d = (fp[i] - fm[i]) / (2.0 * h);
            if !d.is_finite() {
                return Err(Error::NonFinite(format!("Jacobian entry ({i}, {j})")));
            }
            jac[(i, j)] = d;
        }
    }
    Ok(jac)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stiffness {
    /// `|λ|max / |λ|min` over the retained eigenvalues, at least 1.
    pub ratio: f64,
    pub max_magnitude: f64,
    pub min_magnitude: f64,
    /// Set when every eigenvalue is zero; `ratio` is then reported as 1.
    pub undefined: bool,
}

/// Stiffness ratio of a matrix spectrum; magnitudes below `1e-10 |λ|max`
/// are ignored.
pub fn spectrum_stiffness(jac: &DenseMatrix) -> Result<Stiffness> {
    if jac.rows() == 0 {
        return Err(Error::Shape("stiffness of an empty system".into()));
    }
    let mags = eig_magnitudes(jac)?;
    let max = mags[0];
    if max == 0.0 {
        return Ok(Stiffness { ratio: 1.0, max_magnitude: 0.0, min_magnitude: 0.0, undefined: true });
    }
    let min = mags.iter().copied().filter(|&m| m >= 1e-10 * max).fold(f64::INFINITY, f64::min);
    Ok(Stiffness { ratio: (max / min).max(1.0), max_magnitude: max, min_magnitude: min, undefined: false })
}

/// Eigenvalue-magnitude ratio of the finite-difference Jacobian at `(t, y)`.
pub fn stiffness_estimate<F>(f: F, y: &[f64], t: f64) -> Result<Stiffness>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    spectrum_stiffness(&jacobian_fd(f, y, t, None)?)
}
