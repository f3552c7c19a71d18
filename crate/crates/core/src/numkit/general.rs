//! Eigenvalues of general real matrices via balancing, Hessenberg reduction
//! and the Francis double-shift QR iteration (real Schur form, 2x2 blocks for
//! complex pairs). Eigenvectors come from complex inverse iteration.

use num_complex::Complex64;

use super::matrix::DenseMatrix;
use crate::{Error, Result};

/// Iteration budget per eigenvalue (scaled by the order, as in LAPACK).
const QR_ITS_PER_ORDER: usize = 30;

/// Eigenvalues of a square real matrix, in the order the QR deflation
/// produces them. Complex eigenvalues come in adjacent conjugate pairs.
pub fn eigvals(m: &DenseMatrix) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::Shape(format!("eigvals needs a square matrix, got {:?}", m.shape())));
    }
    if !m.all_finite() {
        return Err(Error::NonFinite("eigvals input".into()));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    balance(&mut a);
    hessenberg(&mut a);
    hqr(&mut a)
}

/// Eigenvalue magnitudes sorted in non-increasing order.
pub fn eig_magnitudes(m: &DenseMatrix) -> Result<Vec<f64>> {
    let mut mags: Vec<f64> = eigvals(m)?.iter().map(|z| z.norm()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok(mags)
}

/// Eigenpairs of a general real matrix; each eigenvector is unit-norm with
/// its largest entry rotated onto the positive real axis.
pub fn eig(m: &DenseMatrix) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
    let values = eigvals(m)?;
    let n = m.rows();
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for (k, &lambda) in values.iter().enumerate() {
        // conjugate partner of an already computed vector
        if lambda.im < 0.0 {
            if let Some(j) = (0..k).rev().find(|&j| (values[j] - lambda.conj()).norm() <= 1e-12 * scale) {
                let v: Vec<Complex64> = vectors[j].iter().map(|z| z.conj()).collect();
                vectors.push(v);
                continue;
            }
        }
        let same: Vec<usize> = (0..k).filter(|&j| (values[j] - lambda).norm() <= 1e-9 * scale).collect();
        let v = inverse_iteration(m, lambda, k, scale, same.iter().map(|&j| &vectors[j]))?;
        vectors.push(v);
    }
    Ok((values, vectors))
}

fn inverse_iteration<'a>(
    m: &DenseMatrix,
    lambda: Complex64,
    seed: usize,
    scale: f64,
    previous: impl Iterator<Item = &'a Vec<Complex64>> + Clone,
) -> Result<Vec<Complex64>> {
    let n = m.rows();
    let shift = lambda + Complex64::new(scale * 1e-10, 0.0);
    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = Complex64::new(m[(i, j)], 0.0);
        }
        a[i * n + i] -= shift;
    }
    let lu = ComplexLu::factor(a, n, true)?;
    // deterministic start vector that differs between repeated eigenvalues
    let mut x: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + ((i * 7 + seed * 13) % 11) as f64 / 11.0, 0.0))
        .collect();
    for _ in 0..3 {
        deflate(&mut x, previous.clone());
        x = lu.solve(&x);
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NonFinite("inverse iteration".into()));
        }
        x.iter_mut().for_each(|z| *z /= norm);
    }
    deflate(&mut x, previous);
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    x.iter_mut().for_each(|z| *z /= norm);
    // fix the phase: largest entry real positive
    let (_, big) = x.iter().enumerate().fold((0.0, Complex64::new(1.0, 0.0)), |(b, z), (_, &v)| {
        if v.norm() > b * (1.0 + 1e-12) {
            (v.norm(), v)
        } else {
            (b, z)
        }
    });
    let phase = big.conj() / big.norm();
    x.iter_mut().for_each(|z| *z *= phase);
    Ok(x)
}

fn deflate<'a>(x: &mut [Complex64], previous: impl Iterator<Item = &'a Vec<Complex64>>) {
    for p in previous {
        let d: Complex64 = p.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum();
        x.iter_mut().zip(p).for_each(|(xi, pi)| *xi -= d * pi);
    }
}

/// LU factorization with partial pivoting of a complex square matrix.
pub struct ComplexLu {
    n: usize,
    lu: Vec<Complex64>,
    piv: Vec<usize>,
}

impl ComplexLu {
    /// Factors `a` (row-major). With `regularize`, exactly singular pivots
    /// are nudged instead of rejected, which inverse iteration relies on.
    pub fn factor(mut a: Vec<Complex64>, n: usize, regularize: bool) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Shape("complex LU input".into()));
        }
        let scale = a.iter().fold(0.0_f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm())).unwrap();
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let mut pivot = a[k * n + k];
            if pivot.norm() <= f64::EPSILON * scale * 1e-3 {
                if !regularize {
                    return Err(Error::RankDeficient("singular matrix in complex LU".into()));
                }
                pivot = Complex64::new(f64::EPSILON * scale, 0.0);
                a[k * n + k] = pivot;
            }
            for i in (k + 1)..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                if f != Complex64::new(0.0, 0.0) {
                    for j in (k + 1)..n {
                        let u = a[k * n + j];
                        a[i * n + j] -= f * u;
                    }
                }
            }
        }
        Ok(Self { n, lu: a, piv })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x: Vec<Complex64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let n = a.len();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i][j] *= g;
                    }
                    for row in a.iter_mut() {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

/// Reduction to upper Hessenberg form by stabilized elimination.
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        let mut x: f64 = 0.0;
        let mut i = m;
        for j in m..n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..n {
                let t = a[i][j];
                a[i][j] = a[m][j];
                a[m][j] = t;
            }
            for row in a.iter_mut() {
                row.swap(i, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut() {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
    for i in 2..n {
        for j in 0..(i - 1) {
            a[i][j] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix.
fn hqr(a: &mut [Vec<f64>]) -> Result<Vec<Complex64>> {
    let n = a.len() as isize;
    let mut wr = vec![Complex64::new(0.0, 0.0); n as usize];
    let at = |a: &[Vec<f64>], i: isize, j: isize| a[i as usize][j as usize];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm += at(a, i, j).abs();
        }
    }
    let eps = f64::EPSILON;
    let max_its = QR_ITS_PER_ORDER * (n as usize).max(10);
    let mut nn = n - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l > 0 {
                let mut s = at(a, l - 1, l - 1).abs() + at(a, l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if at(a, l, l - 1).abs() <= eps * s {
                    a[l as usize][(l - 1) as usize] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = at(a, nn, nn);
            if l == nn {
                wr[nn as usize] = Complex64::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let mut y = at(a, nn - 1, nn - 1);
            let mut w = at(a, nn, nn - 1) * at(a, nn - 1, nn);
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    wr[(nn - 1) as usize] = Complex64::new(x + z, 0.0);
                    wr[nn as usize] = Complex64::new(x + z, 0.0);
                    if z != 0.0 {
                        wr[nn as usize] = Complex64::new(x - w / z, 0.0);
                    }
                } else {
                    wr[(nn - 1) as usize] = Complex64::new(x + p, z);
                    wr[nn as usize] = Complex64::new(x + p, -z);
                }
                nn -= 2;
                break;
            }
            if its == max_its {
                return Err(Error::Convergence { what: "Hessenberg QR", iterations: max_its });
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift; the multiplier rotates so that
                // structured spectra (mirror-symmetric pairs) cannot trap
                // the iteration in a cycle
                t += x;
                for i in 0..=nn {
                    a[i as usize][i as usize] -= x;
                }
                let s = at(a, nn, nn - 1).abs() + at(a, nn - 1, nn - 2).abs();
                let k = (its / 10) as f64;
                x = (0.75 + 0.1 * (k * 1.7).sin()) * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = at(a, m, m);
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / at(a, m + 1, m) + at(a, m, m + 1);
                q = at(a, m + 1, m + 1) - z - rr - ss;
                r = at(a, m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = at(a, m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (at(a, m - 1, m - 1).abs() + z.abs() + at(a, m + 1, m + 1).abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..(nn - 1) {
                a[(i + 2) as usize][i as usize] = 0.0;
                if i != m {
                    a[(i + 2) as usize][(i - 1) as usize] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = at(a, k, k - 1);
                    q = at(a, k + 1, k - 1);
                    r = 0.0;
                    if k + 1 != nn {
                        r = at(a, k + 2, k - 1);
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k as usize][(k - 1) as usize] = -at(a, k, k - 1);
                        }
                    } else {
                        a[k as usize][(k - 1) as usize] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = at(a, k, j) + q * at(a, k + 1, j);
                        if k + 1 != nn {
                            pp += r * at(a, k + 2, j);
                            a[(k + 2) as usize][j as usize] -= pp * z;
                        }
                        a[(k + 1) as usize][j as usize] -= pp * y;
                        a[k as usize][j as usize] -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * at(a, i, k) + y * at(a, i, k + 1);
                        if k + 1 != nn {
                            pp += z * at(a, i, k + 2);
                            a[i as usize][(k + 2) as usize] -= pp * r;
                        }
                        a[i as usize][(k + 1) as usize] -= pp * q;
                        a[i as usize][k as usize] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn diagonal_and_rotation() {
        let e = sorted_re(eigvals(&DenseMatrix::diag(&[-1.0, -100.0, 3.0])).unwrap());
        assert_eq!(e.iter().map(|z| z.re).collect::<Vec<_>>(), vec![-100.0, -1.0, 3.0]);
        let rot = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let e = eigvals(&rot).unwrap();
        for z in e {
            assert!((z.norm() - 1.0).abs() < 1e-14 && z.re.abs() < 1e-14);
        }
    }

    #[test]
    fn heavy_ball_companion_converges() {
        // mirror-symmetric spectrum about -γ/2 that stalls plain Francis shifts
        let a = [
            [1.0700226724147797, 0.5571140348911285, -0.4024728834629059, 1.026148498058319, 0.20008234679698944, 0.1954507827758789, -0.5371506363153458, -0.10788241028785706],
            [0.26561392843723297, 0.6375710517168045, -0.3884980231523514, 0.5687501281499863, -0.3909803405404091, 0.1694834679365158, -0.07636336982250214, 0.1302507221698761],
            [-0.2980940118432045, -0.9395714104175568, 2.6361290365457535, -0.7443300038576126, -1.4351472780108452, -0.614989660680294, -0.48649678379297256, -0.11889121681451797],
            [-0.1362515278160572, -0.3793814443051815, -0.2738877646625042, 0.9307376034557819, 0.1559165194630623, 0.41468169912695885, -0.5944720953702927, -0.6788473501801491],
            [-0.38212479650974274, -0.42780181765556335, -2.1581888496875763, 0.1888817846775055, 2.2307237535715103, 0.7442328184843063, 0.3939732164144516, 0.031879812479019165],
            [0.28103793784976006, 0.5822726488113403, -0.33937614783644676, 1.3651918098330498, -0.0904129296541214, 1.1764004603028297, 0.6083222292363644, -2.2307459488511086],
            [-0.10409509390592575, 1.245929092168808, -0.428010031580925, -0.37623095512390137, 0.20907016843557358, 0.8268335089087486, 2.653092473745346, -0.17448915541172028],
            [-0.12603675574064255, 0.4790590927004814, -1.1435246467590332, -0.32261181622743607, 0.17755842953920364, -0.35605383664369583, 0.14326398074626923, 2.3419945389032364],
        ];
        let gamma = 0.42360229790210724;
        let m = DenseMatrix::from_fn(16, 16, |i, j| match (i < 8, j < 8) {
            (true, false) => (j - 8 == i) as u8 as f64,
            (false, true) => a[i - 8][j],
            (false, false) => -gamma * (i == j) as u8 as f64,
            _ => 0.0,
        });
        let ev = eigvals(&m).unwrap();
        let trace: f64 = ev.iter().map(|z| z.re).sum();
        assert!((trace + 8.0 * gamma).abs() < 1e-9);
        let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        for k in 0..8 {
            assert!((re[k] + re[15 - k] + gamma).abs() < 1e-8, "{re:?}");
        }
    }

    #[test]
    fn companion_of_known_polynomial() {
        // x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
        let c = DenseMatrix::from_rows(&[vec![6.0, -11.0, 6.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let e = sorted_re(eigvals(&c).unwrap());
        for (z, want) in e.iter().zip([1.0, 2.0, 3.0]) {
            assert!((z.re - want).abs() < 1e-10 && z.im.abs() < 1e-10);
        }
    }

    #[test]
    fn trace_and_eigenvector_residuals_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 2, 3, 5, 9, 12] {
            let m = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let (vals, vecs) = eig(&m).unwrap();
            let trace: f64 = (0..n).map(|i| m[(i, i)]).sum();
            let sum: Complex64 = vals.iter().sum();
            assert!((sum.re - trace).abs() < 1e-10 && sum.im.abs() < 1e-10);
            for (lambda, v) in vals.iter().zip(&vecs) {
                for i in 0..n {
                    let av: Complex64 = (0..n).map(|j| v[j] * m[(i, j)]).sum();
                    assert!((av - lambda * v[i]).norm() < 1e-8, "n={n}");
                }
            }
        }
    }

    #[test]
    fn complex_lu_solves() {
        let a = vec![
            Complex64::new(2.0, 1.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        let lu = ComplexLu::factor(a.clone(), 2, false).unwrap();
        let b = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)];
        let x = lu.solve(&b);
        let r0 = a[0] * x[0] + a[1] * x[1] - b[0];
        let r1 = a[2] * x[0] + a[3] * x[1] - b[1];
        assert!(r0.norm() < 1e-14 && r1.norm() < 1e-14);
        let singular = vec![Complex64::new(0.0, 0.0); 4];
        assert!(ComplexLu::factor(singular, 2, false).is_err());
    }
}
