use super::matrix::{canonical_sign, dot, DenseMatrix};
use crate::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Thin SVD `M = U diag(S) Vᵀ` with `k = min(rows, cols)` columns.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let us = DenseMatrix::from_fn(self.u.rows(), self.s.len(), |i, j| self.u[(i, j)] * self.s[j]);
        us.matmul(&self.v.transpose()).expect("consistent svd factors")
    }
}

/// One-sided (Hestenes) Jacobi SVD, orthogonalizing along the shorter
/// dimension. Singular vectors follow the same sign convention as
/// [`super::sym_eig`], applied to the right vectors.
pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    if m.is_empty() {
        return Err(Error::Shape(format!("svd of empty {:?} matrix", m.shape())));
    }
    if !m.all_finite() {
        return Err(Error::NonFinite("svd input".into()));
    }
    if m.rows() >= m.cols() {
        one_sided(m)
    } else {
        let t = one_sided(&m.transpose())?;
        let mut out = Svd { u: t.v, s: t.s, v: t.u };
        // keep the sign convention on the right vectors
        for j in 0..out.s.len() {
            let mut v = out.v.column(j);
            let before = v.clone();
            canonical_sign(&mut v);
            if v != before {
                out.v.set_column(j, &v);
                let u: Vec<f64> = out.u.column(j).iter().map(|x| -x).collect();
                out.u.set_column(j, &u);
            }
        }
        Ok(out)
    }
}

fn one_sided(m: &DenseMatrix) -> Result<Svd> {
    let (rows, n) = m.shape();
    // row i of `w` is column i of the working matrix
    let mut w = m.transpose();
    let mut vt = DenseMatrix::identity(n);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = dot(w.row(i), w.row(i));
                let beta = dot(w.row(j), w.row(j));
                let gamma = dot(w.row(i), w.row(j));
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, i, j, c, s);
                rotate_pair(&mut vt, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence { what: "one-sided Jacobi SVD", iterations: MAX_SWEEPS });
    }

    let norms: Vec<f64> = (0..n).map(|i| dot(w.row(i), w.row(i)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let mut u = DenseMatrix::zeros(rows, n);
    let mut v = DenseMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (k, &i) in order.iter().enumerate() {
        let sigma = norms[i];
        let mut vk = vt.row(i).to_vec();
        let mut uk: Vec<f64> = if sigma > 0.0 { w.row(i).iter().map(|x| x / sigma).collect() } else { vec![0.0; rows] };
        let flip = {
            let before = vk.clone();
            canonical_sign(&mut vk);
            vk != before
        };
        if flip {
            uk.iter_mut().for_each(|x| *x = -*x);
        }
        let uk = orthonormalize_against(&basis, uk, k);
        basis.push(uk.clone());
        u.set_column(k, &uk);
        v.set_column(k, &vk);
        s.push(sigma);
    }
    Ok(Svd { u, s, v })
}

/// Gram–Schmidt `x` against `basis`; when `x` has (numerically) no
/// component outside the span, substitutes a unit vector that does.
fn orthonormalize_against(basis: &[Vec<f64>], x: Vec<f64>, seed: usize) -> Vec<f64> {
    let project_out = |mut y: Vec<f64>| {
        for _ in 0..2 {
            for b in basis {
                let d = dot(&y, b);
                y.iter_mut().zip(b).for_each(|(yi, bi)| *yi -= d * bi);
            }
        }
        y
    };
    let y = project_out(x);
    let norm = dot(&y, &y).sqrt();
    if norm > 0.5 {
        return y.into_iter().map(|v| v / norm).collect();
    }
    let dim = y.len();
    for offset in 0..dim {
        let mut e = vec![0.0; dim];
        e[(seed + offset) % dim] = 1.0;
        let e = project_out(e);
        let n = dot(&e, &e).sqrt();
        if n > 0.5 {
            return e.into_iter().map(|v| v / n).collect();
        }
    }
    unreachable!("basis cannot span the whole space while fewer than `dim` vectors are present")
}

fn rotate_pair(m: &mut DenseMatrix, i: usize, j: usize, c: f64, s: f64) {
    let n = m.cols();
    let data = m.as_mut_slice();
    let (lo, hi) = data.split_at_mut(j * n);
    let ri = &mut lo[i * n..(i + 1) * n];
    let rj = &mut hi[..n];
    for k in 0..n {
        let x = ri[k];
        let y = rj[k];
        ri[k] = c * x - s * y;
        rj[k] = s * x + c * y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::sym_eig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn orthonormal_cols(m: &DenseMatrix) -> f64 {
        let g = m.transpose().matmul(m).unwrap();
        g.sub(&DenseMatrix::identity(m.cols())).unwrap().max_abs()
    }

    #[test]
    fn zero_matrix_has_zero_singular_values() {
        let r = svd(&DenseMatrix::zeros(2, 3)).unwrap();
        assert_eq!(r.s, vec![0.0, 0.0]);
        assert!(orthonormal_cols(&r.u) < 1e-14);
        assert!(orthonormal_cols(&r.v) < 1e-14);
    }

    #[test]
    fn diagonal_case() {
        let r = svd(&DenseMatrix::diag(&[3.0, 2.0])).unwrap();
        assert_eq!(r.s, vec![3.0, 2.0]);
    }

    #[test]
    fn empty_is_shape_error() {
        assert!(matches!(svd(&DenseMatrix::zeros(0, 3)), Err(Error::Shape(_))));
    }

    #[test]
    fn random_wide_matrix_matches_gram_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = DenseMatrix::from_fn(6, 10, |_, _| rng.gen_range(-1.0..1.0));
        let r = svd(&m).unwrap();
        let err = r.reconstruct().sub(&m).unwrap().frobenius_norm();
        assert!(err <= 1e-8 * m.frobenius_norm());
        assert!(orthonormal_cols(&r.u) < 1e-10);
        assert!(orthonormal_cols(&r.v) < 1e-10);
        let eig = sym_eig(&m.gram_rows()).unwrap();
        for (s, l) in r.s.iter().zip(&eig.eigenvalues) {
            assert!((s * s - l).abs() <= 1e-8 * eig.eigenvalues[0], "{s} {l}");
            assert!((s - l.max(0.0).sqrt()).abs() <= 1e-8 * r.s[0]);
        }
    }

    #[test]
    fn rank_deficient_tall_matrix_keeps_orthonormal_u() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.0, -1.0, 0.5];
        let m = DenseMatrix::from_fn(4, 3, |i, j| a[i] * b[j]);
        let r = svd(&m).unwrap();
        assert!(r.s[1] < 1e-12 && r.s[2] < 1e-12);
        assert!(orthonormal_cols(&r.u) < 1e-10);
        assert!(r.reconstruct().sub(&m).unwrap().max_abs() < 1e-12);
    }
}
