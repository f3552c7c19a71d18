use serde::{Deserialize, Serialize};

use crate::fom::SnapshotSet;
use crate::numkit::{dot, sym_eig, DenseMatrix};
use crate::{Error, Result};

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-12;

/// POD basis of a centered snapshot matrix `Y` (rows are snapshots).
///
/// `coeffs[(j, i)]` is the temporal coefficient of mode `i` at snapshot `j`,
/// i.e. the `i`-th unit eigenvector of `Y Yᵀ` scaled by `sqrt(λ_i)`, and
/// `modes` holds the matching orthonormal spatial modes as columns, so that
/// row `j` of `Y` is approximated by `Σ_i coeffs[(j, i)] · modes[.., i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PodBasis {
    pub mean: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub coeffs: DenseMatrix,
    pub modes: DenseMatrix,
    pub r: usize,
    /// Number of eigenvalues above `1e-12 · λ₁`.
    pub effective_rank: usize,
}

impl PodBasis {
    pub fn n_dof(&self) -> usize {
        self.modes.rows()
    }

    pub fn relative_info(&self, r: usize) -> Result<f64> {
        relative_info(&self.eigenvalues, r)
    }

    /// Coefficients of arbitrary snapshots (mean removed) in this basis.
    pub fn project(&self, snapshots: &DenseMatrix) -> Result<DenseMatrix> {
        if snapshots.cols() != self.n_dof() {
            return Err(Error::Shape(format!("{} dofs for a basis over {}", snapshots.cols(), self.n_dof())));
        }
        let mut out = DenseMatrix::zeros(snapshots.rows(), self.r);
        for j in 0..snapshots.rows() {
            let centered: Vec<f64> = snapshots.row(j).iter().zip(&self.mean).map(|(a, m)| a - m).collect();
            let c = self.modes.t_matvec(&centered)?;
            out.row_mut(j).copy_from_slice(&c);
        }
        Ok(out)
    }
}

/// Subtracts the per-column temporal mean.
pub fn center_snapshots(s: &SnapshotSet) -> Result<(SnapshotSet, Vec<f64>)> {
    let nt = s.n_t();
    if nt < 2 {
        return Err(Error::InsufficientData(format!("centering needs at least two snapshots, got {nt}")));
    }
    let data = s.data();
    let mut mean = vec![0.0; s.n_dof()];
    for j in 0..nt {
        for (m, v) in mean.iter_mut().zip(data.row(j)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nt as f64);
    let mut fluct = data.clone();
    for j in 0..nt {
        for (v, m) in fluct.row_mut(j).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    Ok((s.with_data(fluct)?, mean))
}

/// POD by the method of snapshots: eigendecomposition of `K = Y Yᵀ`.
pub fn pod_fit(fluct: &SnapshotSet, r: usize) -> Result<PodBasis> {
    pod_fit_matrix(fluct.data(), r)
}

/// Centers `s` and fits a POD basis that remembers the mean.
pub fn pod_from_snapshots(s: &SnapshotSet, r: usize) -> Result<PodBasis> {
    let (fluct, mean) = center_snapshots(s)?;
    let mut basis = pod_fit(&fluct, r)?;
    basis.mean = mean;
    Ok(basis)
}

pub fn pod_fit_matrix(y: &DenseMatrix, r: usize) -> Result<PodBasis> {
    let (nt, ndof) = y.shape();
    if r == 0 || r > nt.min(ndof) {
        return Err(Error::Config(format!("POD order {r} outside 1..={}", nt.min(ndof))));
    }
    let k = y.gram_rows();
    let eig = sym_eig(&k)?;
    let eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let lead = eigenvalues[0];
    let effective_rank = eigenvalues.iter().take_while(|&&l| lead > 0.0 && l > RANK_TOL * lead).count();
    if effective_rank < r {
        log::warn!("POD order {r} exceeds the effective rank {effective_rank}; trailing modes are arbitrary completions");
    }

    let mut modes: Vec<Vec<f64>> = Vec::with_capacity(r);
    for i in 0..r {
        let candidate = if i < effective_rank {
            let alpha = eig.vector(i);
            let psi = y.t_matvec(&alpha)?;
            let scale = eigenvalues[i].sqrt();
            psi.into_iter().map(|v| v / scale).collect()
        } else {
            vec![0.0; ndof]
        };
        modes.push(orthonormalize(&modes, candidate, i));
    }
    let mut mode_matrix = DenseMatrix::zeros(ndof, r);
    for (i, m) in modes.iter().enumerate() {
        mode_matrix.set_column(i, m);
    }
    let mut coeffs = DenseMatrix::zeros(nt, r);
    for j in 0..nt {
        for (i, m) in modes.iter().enumerate() {
            coeffs[(j, i)] = dot(y.row(j), m);
        }
    }
    Ok(PodBasis { mean: vec![0.0; ndof], eigenvalues, coeffs, modes: mode_matrix, r, effective_rank })
}

/// Modified Gram–Schmidt of `x` against `basis`, replacing a vanishing
/// remainder with the first coordinate direction outside the span.
fn orthonormalize(basis: &[Vec<f64>], x: Vec<f64>, seed: usize) -> Vec<f64> {
    let sweep = |mut y: Vec<f64>| {
        for b in basis {
            let d = dot(&y, b);
            y.iter_mut().zip(b).for_each(|(v, bi)| *v -= d * bi);
        }
        y
    };
    let norm0 = dot(&x, &x).sqrt();
    let y = sweep(x);
    let n = dot(&y, &y).sqrt();
    if norm0 > 0.0 && n > 0.5 * norm0 {
        return y.into_iter().map(|v| v / n).collect();
    }
    let dim = y.len();
    for offset in 0..dim {
        let mut e = vec![0.0; dim];
        e[(seed + offset) % dim] = 1.0;
        let e = sweep(sweep(e));
        let n = dot(&e, &e).sqrt();
        if n > 0.5 {
            return e.into_iter().map(|v| v / n).collect();
        }
    }
    unreachable!("fewer basis vectors than dimensions")
}

/// Fraction of eigenvalue mass captured by the leading `r` eigenvalues.
pub fn relative_info(eigenvalues: &[f64], r: usize) -> Result<f64> {
    if r == 0 || r > eigenvalues.len() {
        return Err(Error::Config(format!("order {r} outside 1..={}", eigenvalues.len())));
    }
    if eigenvalues.iter().any(|&l| l < 0.0 || !l.is_finite()) {
        return Err(Error::Config("eigenvalues must be finite and non-negative".into()));
    }
    let total: f64 = eigenvalues.iter().sum();
    if total == 0.0 {
        return Err(Error::DegenerateSpectrum("all eigenvalues are zero".into()));
    }
    if r == eigenvalues.len() {
        return Ok(1.0);
    }
    Ok(eigenvalues[..r].iter().sum::<f64>() / total)
}

/// Maps coefficient rows back to full snapshots: `Σ_i α_i ψ_i + mean`.
pub fn pod_reconstruct(basis: &PodBasis, coeff_rows: &DenseMatrix) -> Result<DenseMatrix> {
    if coeff_rows.cols() != basis.r {
        return Err(Error::Shape(format!("{} coefficients per row for a rank-{} basis", coeff_rows.cols(), basis.r)));
    }
    let mut out = coeff_rows.matmul(&basis.modes.transpose())?;
    for j in 0..out.rows() {
        for (v, m) in out.row_mut(j).iter_mut().zip(&basis.mean) {
            *v += m;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::{Field, Source};
    use crate::numkit::svd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn snaps(data: DenseMatrix) -> SnapshotSet {
        let times = (0..data.rows()).map(|k| k as f64).collect();
        let n = data.cols();
        SnapshotSet::new(times, data, vec![Field::new("u", n)], Source::Synthetic).unwrap()
    }

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn centering_cases() {
        let s = snaps(DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap());
        let (f, mean) = center_snapshots(&s).unwrap();
        assert_eq!(mean, vec![1.0, 2.0]);
        assert!(f.data().as_slice().iter().all(|&v| v == 0.0));

        let s = snaps(DenseMatrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap());
        let (f, mean) = center_snapshots(&s).unwrap();
        assert_eq!(mean, vec![1.0]);
        assert_eq!(f.data().as_slice(), &[-1.0, 1.0]);

        let s = snaps(random(10, 30, 1));
        let (f, _) = center_snapshots(&s).unwrap();
        let scale = s.data().max_abs();
        for c in 0..30 {
            let sum: f64 = f.data().column(c).iter().sum();
            assert!(sum.abs() <= 1e-10 * 10.0 * scale);
        }

        let one = snaps(DenseMatrix::zeros(1, 3));
        assert!(matches!(center_snapshots(&one), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn rank_one_is_exact() {
        let a = [1.0, -2.0, 0.5, 3.0];
        let b = [0.3, 1.0, -1.0, 2.0, 0.1];
        let y = DenseMatrix::from_fn(4, 5, |i, j| a[i] * b[j]);
        let basis = pod_fit(&snaps(y.clone()), 1).unwrap();
        assert_eq!(basis.effective_rank, 1);
        assert!((basis.relative_info(1).unwrap() - 1.0).abs() < 1e-12);
        let rec = pod_reconstruct(&basis, &basis.coeffs).unwrap();
        assert!(rec.sub(&y).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn full_rank_round_trip_and_svd_equivalence() {
        let y = random(20, 50, 2);
        let basis = pod_fit(&snaps(y.clone()), 20).unwrap();
        let rec = pod_reconstruct(&basis, &basis.coeffs).unwrap();
        assert!(rec.sub(&y).unwrap().frobenius_norm() <= 1e-8 * y.frobenius_norm());
        let gram = basis.modes.transpose().matmul(&basis.modes).unwrap();
        assert!(gram.sub(&DenseMatrix::identity(20)).unwrap().max_abs() < 1e-8);
        let s = svd(&y).unwrap();
        for (sv, l) in s.s.iter().zip(&basis.eigenvalues) {
            assert!((sv * sv - l).abs() <= 1e-8 * basis.eigenvalues[0]);
        }
    }

    #[test]
    fn truncation_error_matches_tail_eigenvalues() {
        let y = random(20, 50, 3);
        let basis = pod_fit(&snaps(y.clone()), 5).unwrap();
        let rec = pod_reconstruct(&basis, &basis.coeffs).unwrap();
        let err2 = rec.sub(&y).unwrap().frobenius_norm().powi(2);
        let tail: f64 = basis.eigenvalues[5..].iter().sum();
        assert!((err2 - tail).abs() <= 1e-6 * tail);
        let total: f64 = basis.eigenvalues.iter().sum();
        let rel = err2 / y.frobenius_norm().powi(2);
        assert!((rel - (1.0 - basis.relative_info(5).unwrap())).abs() < 1e-10 * total.max(1.0));
    }

    #[test]
    fn relative_info_cases() {
        assert_eq!(relative_info(&[3.0, 2.0, 1.0], 3).unwrap(), 1.0);
        assert_eq!(relative_info(&[1.0, 0.0, 0.0], 1).unwrap(), 1.0);
        assert!((relative_info(&[4.0, 3.0, 2.0, 1.0], 2).unwrap() - 0.7).abs() < 1e-15);
        assert!(matches!(relative_info(&[0.0, 0.0], 1), Err(Error::DegenerateSpectrum(_))));
        assert!(relative_info(&[1.0], 2).is_err());
    }

    #[test]
    fn order_bounds_and_width_checks() {
        let s = snaps(random(4, 6, 4));
        assert!(matches!(pod_fit(&s, 0), Err(Error::Config(_))));
        assert!(matches!(pod_fit(&s, 5), Err(Error::Config(_))));
        let basis = pod_fit(&s, 2).unwrap();
        assert!(matches!(pod_reconstruct(&basis, &DenseMatrix::zeros(1, 3)), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_coefficients_give_the_mean() {
        let s = snaps(random(6, 8, 5));
        let basis = pod_from_snapshots(&s, 3).unwrap();
        let rec = pod_reconstruct(&basis, &DenseMatrix::zeros(2, 3)).unwrap();
        for j in 0..2 {
            assert_eq!(rec.row(j), basis.mean.as_slice());
        }
    }

    #[test]
    fn rank_deficient_order_still_orthonormal() {
        let a = [1.0, 2.0, 3.0];
        let y = DenseMatrix::from_fn(3, 6, |i, j| a[i] * (j as f64 + 1.0));
        let basis = pod_fit(&snaps(y), 3).unwrap();
        assert_eq!(basis.effective_rank, 1);
        let gram = basis.modes.transpose().matmul(&basis.modes).unwrap();
        assert!(gram.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-10);
    }
}
