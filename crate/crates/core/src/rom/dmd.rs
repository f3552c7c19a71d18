use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lift::{lift, LiftSpec};
use crate::fom::SnapshotSet;
use crate::numkit::{dot, eig, norm2, svd, ComplexLu, DenseMatrix};
use crate::{Error, Result};

const RANK_TOL: f64 = 1e-12;
const IMAG_TOL: f64 = 1e-8;

/// Rank-`r` DMD of lifted fluctuation snapshots.
///
/// `basis` holds the leading left singular vectors `X̃` of the lifted snapshot
/// matrix, `reduced_operator` is `Ã = X̃ᵀ U⁺ Ṽ Σ̃⁻¹`, and `eigenvectors[i]` is
/// the `i`-th eigenvector `wᵢ` of `Ã`, so the DMD mode is `φᵢ = X̃ wᵢ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmdModel {
    pub lift: LiftSpec,
    /// Mean added back to the identity segment of predictions.
    pub mean: Vec<f64>,
    pub rank: usize,
    pub n_dof: usize,
    pub basis: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub reduced_operator: DenseMatrix,
    pub eigenvalues: Vec<Complex64>,
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub amplitudes: Vec<Complex64>,
    /// Reduced coordinates `X̃ᵀ u′` of the last training snapshot.
    pub last_reduced: Vec<f64>,
    /// Largest one-step residual `‖u′ₖ₊₁ − X̃ÃX̃ᵀu′ₖ‖` over the training pairs.
    pub fit_residual: f64,
}

impl DmdModel {
    pub fn with_mean(mut self, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != self.n_dof {
            return Err(Error::Shape(format!("mean of length {} for {} dofs", mean.len(), self.n_dof)));
        }
        self.mean = mean;
        Ok(self)
    }

    pub fn lifted_dof(&self) -> usize {
        self.basis.rows()
    }

    /// DMD modes `φᵢ = X̃ wᵢ` over the lifted dofs.
    pub fn modes(&self) -> Vec<Vec<Complex64>> {
        self.eigenvectors.iter().map(|w| self.expand(w)).collect()
    }

    /// Share of the squared singular values carried by the leading `r`.
    pub fn relative_info(&self, r: usize) -> Result<f64> {
        let sq: Vec<f64> = self.singular_values.iter().map(|s| s * s).collect();
        super::pod::relative_info(&sq, r)
    }

    /// Modal reconstruction `Σ φᵢ λᵢʲ bᵢ` of training snapshot `j`
    /// (identity segment, mean added).
    pub fn mode_expansion(&self, j: usize) -> Vec<f64> {
        let coeffs: Vec<Complex64> =
            self.amplitudes.iter().zip(&self.eigenvalues).map(|(b, l)| b * l.powu(j as u32)).collect();
        let z = self.combine(&coeffs);
        self.finish(&z.iter().map(|c| c.re).collect::<Vec<_>>())
    }

    fn expand(&self, w: &[Complex64]) -> Vec<Complex64> {
        (0..self.lifted_dof())
            .map(|i| self.basis.row(i).iter().zip(w).map(|(&x, &c)| c * x).sum())
            .collect()
    }

    /// `Σ cᵢ wᵢ` in reduced coordinates.
    fn combine(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut z = vec![Complex64::new(0.0, 0.0); self.rank];
        for (w, &ci) in self.eigenvectors.iter().zip(c) {
            z.iter_mut().zip(w).for_each(|(zj, &wj)| *zj += ci * wj);
        }
        z
    }

    fn finish(&self, z: &[f64]) -> Vec<f64> {
        let full = self.basis.matvec(z).expect("reduced coordinates match the basis");
        full[..self.n_dof].iter().zip(&self.mean).map(|(v, m)| v + m).collect()
    }

    fn eigvec_lu(&self) -> Result<ComplexLu> {
        let r = self.rank;
        let mut a = vec![Complex64::new(0.0, 0.0); r * r];
        for (j, w) in self.eigenvectors.iter().enumerate() {
            for (i, &v) in w.iter().enumerate() {
                a[i * r + j] = v;
            }
        }
        ComplexLu::factor(a, r, false)
    }

    /// Reduced state after `k` steps, through the eigendecomposition when it
    /// is well conditioned and by repeated application of `Ã` otherwise.
    pub fn reduced_prediction(&self, k: usize) -> Vec<f64> {
        if let Ok(lu) = self.eigvec_lu() {
            let z0: Vec<Complex64> = self.last_reduced.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let c = lu.solve(&z0);
            let ck: Vec<Complex64> = c.iter().zip(&self.eigenvalues).map(|(c, l)| c * l.powu(k as u32)).collect();
            let z = self.combine(&ck);
            let re: Vec<f64> = z.iter().map(|c| c.re).collect();
            let im = z.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
            let scale = norm2(&re).max(f64::MIN_POSITIVE);
            if im.is_finite() && im <= IMAG_TOL * scale {
                return re;
            }
            log::warn!("modal DMD prediction lost conjugate symmetry ({:.1e}); using operator powers", im / scale);
        }
        let mut z = self.last_reduced.clone();
        for _ in 0..k {
            z = self.reduced_operator.matvec(&z).expect("square reduced operator");
        }
        z
    }
}

/// Fits DMD on lifted fluctuations. Rows of `fluct` are consecutive
/// snapshots; the mean is attached separately via [`DmdModel::with_mean`].
pub fn dmd_fit(fluct: &SnapshotSet, r: usize, spec: &LiftSpec) -> Result<DmdModel> {
    let nt = fluct.n_t();
    if nt < 3 {
        return Err(Error::InsufficientData(format!("DMD needs at least three snapshots, got {nt}")));
    }
    let lifted = lift(fluct, spec)?;
    let x = lifted.data();
    let d = x.cols();
    let max_rank = d.min(nt - 1);
    if r == 0 || r > max_rank {
        return Err(Error::Config(format!("DMD rank {r} outside 1..={max_rank}")));
    }
    // columns are time snapshots
    let current = x.row_range(0, nt - 1).transpose();
    let dec = svd(&current)?;
    let sigma1 = dec.s[0];
    if sigma1 == 0.0 || dec.s[r - 1] < RANK_TOL * sigma1 {
        return Err(Error::RankDeficient(format!(
            "σ_{r} = {:.3e} against σ₁ = {:.3e}",
            dec.s[r - 1],
            sigma1
        )));
    }
    let basis = dec.u.col_range(0, r);
    // Ã = X̃ᵀ U⁺ Ṽ Σ̃⁻¹ where U⁺ has columns x₁…x_{N−1}
    let mut shifted_v = DenseMatrix::zeros(d, r);
    for k in 1..nt {
        let xk = x.row(k);
        let vk = dec.v.row(k - 1);
        for i in 0..d {
            let xi = xk[i];
            if xi != 0.0 {
                for (o, &v) in shifted_v.row_mut(i).iter_mut().zip(&vk[..r]) {
                    *o += xi * v;
                }
            }
        }
    }
    let mut op = basis.transpose().matmul(&shifted_v)?;
    for i in 0..r {
        for j in 0..r {
            op[(i, j)] /= dec.s[j];
        }
    }
    let (eigenvalues, eigenvectors) = eig(&op)?;

    let reduce = |row: &[f64]| basis.t_matvec(row).expect("lifted width");
    let mut fit_residual = 0.0_f64;
    let mut z = reduce(x.row(0));
    for k in 0..nt - 1 {
        let pred = basis.matvec(&op.matvec(&z)?)?;
        let next = x.row(k + 1);
        let res: f64 = pred.iter().zip(next).map(|(p, n)| (p - n) * (p - n)).sum::<f64>().sqrt();
        fit_residual = fit_residual.max(res);
        z = reduce(next);
    }
    let last_reduced = z;
    let z0: Vec<Complex64> = reduce(x.row(0)).into_iter().map(|v| Complex64::new(v, 0.0)).collect();

    let mut model = DmdModel {
        lift: spec.clone(),
        mean: vec![0.0; fluct.n_dof()],
        rank: r,
        n_dof: fluct.n_dof(),
        basis,
        singular_values: dec.s,
        reduced_operator: op,
        eigenvalues,
        eigenvectors,
        amplitudes: Vec::new(),
        last_reduced,
        fit_residual,
    };
    model.amplitudes = match model.eigvec_lu() {
        Ok(lu) => lu.solve(&z0),
        Err(_) => {
            log::warn!("DMD eigenvectors are numerically dependent; amplitudes are regularized");
            let r = model.rank;
            let mut a = vec![Complex64::new(0.0, 0.0); r * r];
            for (j, w) in model.eigenvectors.iter().enumerate() {
                for (i, &v) in w.iter().enumerate() {
                    a[i * r + j] = v;
                }
            }
            ComplexLu::factor(a, r, true)?.solve(&z0)
        }
    };
    Ok(model)
}

/// Snapshot `k` steps past the end of training: `X̃ Ãᵏ X̃ᵀ u′_last`, reduced
/// to the identity segment with the mean added back.
pub fn dmd_predict(model: &DmdModel, k: usize) -> Vec<f64> {
    model.finish(&model.reduced_prediction(k))
}

/// Convenience: one-step residual of the fitted operator on arbitrary data.
pub fn one_step_error(model: &DmdModel, from: &[f64], to: &[f64]) -> Result<f64> {
    let lifted = model.lift.apply(from);
    let z = model.basis.t_matvec(&lifted)?;
    let next = model.basis.matvec(&model.reduced_operator.matvec(&z)?)?;
    let target = model.lift.apply(to);
    let diff: Vec<f64> = next.iter().zip(&target).map(|(a, b)| a - b).collect();
    Ok(dot(&diff, &diff).sqrt())
}
