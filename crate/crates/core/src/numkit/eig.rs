use super::matrix::{canonical_sign, DenseMatrix};
use crate::{Error, Result};

const MAX_SWEEPS: usize = 100;
const OFF_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenpairs of a symmetric matrix, eigenvalues in non-increasing order.
#[derive(Clone, Debug)]
pub struct SymEigResult {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors stored as columns.
    pub eigenvectors: DenseMatrix,
}

impl SymEigResult {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k)
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps over all off-diagonal pairs until the off-diagonal Frobenius mass
/// drops below `1e-12 ‖S‖_F`, with a cap of 100 sweeps. Each eigenvector is
/// signed so that its largest-magnitude entry is positive.
pub fn sym_eig(s: &DenseMatrix) -> Result<SymEigResult> {
    if !s.is_square() {
        return Err(Error::Shape(format!("sym_eig needs a square matrix, got {:?}", s.shape())));
    }
    let n = s.rows();
    let norm = s.frobenius_norm();
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Asymmetric(asym));
    }

    let mut a = s.clone();
    // rows of `vt` are the eigenvectors, so rotations touch contiguous memory
    let mut vt = DenseMatrix::identity(n);
    let target = OFF_TOL * norm;
    // entries this small cannot keep the off-diagonal mass above `target`
    let negligible = target / n.max(1) as f64;
    let mut converged = n <= 1 || norm == 0.0;
    let mut sweep = 0;
    while !converged && sweep < MAX_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= negligible {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // skip rotations that cannot change the diagonal at working precision
                if apq.abs() < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                rotate(&mut a, p, q, c, sn, t, apq);
                rotate_rows(&mut vt, p, q, c, sn);
            }
        }
        sweep += 1;
    }
    log::debug!("Jacobi eigensolver on {n}x{n} finished after {sweep} sweeps");
    if !converged && off_diagonal_norm(&a) > target {
        return Err(Error::Convergence { what: "Jacobi eigensolver", iterations: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut v = vt.row(i).to_vec();
        canonical_sign(&mut v);
        vectors.set_column(k, &v);
    }
    Ok(SymEigResult { eigenvalues, eigenvectors: vectors })
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += 2.0 * a[(i, j)] * a[(i, j)];
        }
    }
    s.sqrt()
}

/// Applies `JᵀAJ` for the plane rotation on (p, q), keeping `a` symmetric.
fn rotate(a: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64, t: f64, apq: f64) {
    let n = a.cols();
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    rotate_rows(a, p, q, c, s);
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        if k != p && k != q {
            a[(k, p)] = a[(p, k)];
            a[(k, q)] = a[(q, k)];
        }
    }
}

fn rotate_rows(m: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.cols();
    let data = m.as_mut_slice();
    let (lo, hi) = data.split_at_mut(q * n);
    let row_p = &mut lo[p * n..(p + 1) * n];
    let row_q = &mut hi[..n];
    for k in 0..n {
        let x = row_p[k];
        let y = row_q[k];
        row_p[k] = c * x - s * y;
        row_q[k] = s * x + c * y;
    }
}
