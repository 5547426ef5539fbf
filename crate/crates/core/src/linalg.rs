//! Small dense linear-algebra helpers.
//!
//! Every matrix in this simulator is either tiny (G x G noise covariances,
//! (P+1) x (P+1) LMMSE normal equations) or only materialised in tests
//! (N x N transform oracles), so a compact row-major `CMat` plus a couple of
//! hand-rolled factorisations covers all needs without pulling in a full
//! LAPACK binding.

use num_complex::Complex64;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    /// All-zeros matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Build a matrix from an entry function `f(row, col)`.
    pub fn from_fn<F: FnMut(usize, usize) -> Complex64>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    /// Diagonal matrix with the given entries.
    pub fn from_diag(diag: &[Complex64]) -> Self {
        let mut m = CMat::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    /// Borrow row `i` as a contiguous slice.
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        // i-k-j order keeps the inner loop contiguous in both `rhs` and `out`.
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &r) in out_row.iter_mut().zip(rhs_row.iter()) {
                    *o += a * r;
                }
            }
        }
        out
    }

    /// Matrix-vector product `self * v`.
    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v.iter())
                    .map(|(&a, &x)| a * x)
                    .sum()
            })
            .collect()
    }

    /// Conjugate transpose `self^H`.
    pub fn conj_transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    /// Entry-wise difference `self - rhs`.
    pub fn sub(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(rhs.data.iter())
            .map(|(&a, &b)| a - b)
            .collect();
        CMat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Frobenius norm.
    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum entry-wise absolute deviation from `rhs`.
    pub fn max_abs_diff(&self, rhs: &CMat) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data
            .iter()
            .zip(rhs.data.iter())
            .map(|(&a, &b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Lower-triangular Cholesky factor `L` of a real symmetric matrix `a`
/// (row-major, order `n`) with `a = L * L^T`. Returns `None` when the matrix
/// is not numerically positive definite.
pub fn cholesky_lower(a: &[f64], n: usize) -> Option<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + j] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as columns
/// of the returned row-major matrix, so `a = V * diag(w) * V^T`.
///
/// Intended for the very small matrices (order <= ~16) that arise as noise
/// covariances; convergence there takes only a handful of sweeps.
pub fn jacobi_eigh(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                // Standard Jacobi angle: tan(2 phi) = 2 a_pq / (a_pp - a_qq).
                let phi = 0.5 * (2.0 * apq).atan2(app - aqq);
                let (s, c) = phi.sin_cos();
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp + s * mkq;
                    m[k * n + q] = -s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk + s * mqk;
                    m[q * n + k] = -s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp + s * vkq;
                    v[k * n + q] = -s * vkp + c * vkq;
                }
            }
        }
    }
    let w = (0..n).map(|i| m[i * n + i]).collect();
    (w, v)
}

/// Solve the Hermitian positive-definite system `m x = b` in place via a
/// complex Cholesky factorisation. Returns `None` when `m` is not
/// numerically positive definite.
pub fn hermitian_solve(m: &CMat, b: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = m.rows();
    assert_eq!(m.cols(), n);
    assert_eq!(b.len(), n);
    // Factor m = L L^H with L lower triangular (real positive diagonal).
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            if i == j {
                if s.re <= 0.0 || s.im.abs() > 1e-9 * (1.0 + s.re.abs()) {
                    return None;
                }
                l[i * n + j] = Complex64::new(s.re.sqrt(), 0.0);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    // Forward substitution L z = b.
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = l[i * n + k] * z[k];
            z[i] -= t;
        }
        z[i] /= l[i * n + i];
    }
    // Back substitution L^H x = z.
    let mut x = z;
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = l[k * n + i].conj() * x[k];
            x[i] -= t;
        }
        x[i] /= l[i * n + i];
    }
    Some(x)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_is_multiplicative_unit() {
        let a = CMat::from_fn(3, 3, |i, j| c((i * 3 + j) as f64, (i as f64) - (j as f64)));
        let id = CMat::identity(3);
        assert!(a.mul(&id).max_abs_diff(&a) < 1e-15);
        assert!(id.mul(&a).max_abs_diff(&a) < 1e-15);
    }

    #[test]
    fn conj_transpose_of_product_reverses_factors() {
        let a = CMat::from_fn(2, 3, |i, j| c(i as f64 + 1.0, j as f64));
        let b = CMat::from_fn(3, 2, |i, j| c(j as f64 - 1.0, i as f64 * 0.5));
        let lhs = a.mul(&b).conj_transpose();
        let rhs = b.conj_transpose().mul(&a.conj_transpose());
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn cholesky_reconstructs_spd_matrix() {
        // a = b b^T + n I is symmetric positive definite by construction.
        let n = 4;
        let b: Vec<f64> = (0..n * n).map(|k| ((k * 7 + 3) % 11) as f64 / 11.0).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { n as f64 } else { 0.0 };
                for k in 0..n {
                    s += b[i * n + k] * b[j * n + k];
                }
                a[i * n + j] = s;
            }
        }
        let l = cholesky_lower(&a, n).expect("matrix is positive definite");
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += l[i * n + k] * l[j * n + k];
                }
                assert!((s - a[i * n + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite_matrix() {
        let a = vec![1.0, 2.0, 2.0, 1.0]; // eigenvalues 3 and -1
        assert!(cholesky_lower(&a, 2).is_none());
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let a = vec![2.0, 1.0, 1.0, 2.0];
        let (mut w, v) = jacobi_eigh(&a, 2);
        w.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!((w[1] - 3.0).abs() < 1e-12);
        // Eigenvector columns reconstruct the matrix.
        let (w2, _) = jacobi_eigh(&a, 2);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += v[i * 2 + k] * w2[k] * v[j * 2 + k];
                }
                assert!((s - a[i * 2 + j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hermitian_solve_matches_direct_multiplication() {
        // m = g g^H + I is Hermitian positive definite.
        let n = 5;
        let g = CMat::from_fn(n, n, |i, j| c(((i + 2 * j) % 5) as f64 / 3.0, ((3 * i + j) % 7) as f64 / 4.0));
        let mut m = g.mul(&g.conj_transpose());
        for i in 0..n {
            let d = m.get(i, i) + c(1.0, 0.0);
            m.set(i, i, d);
        }
        let x_true: Vec<Complex64> = (0..n).map(|k| c(k as f64 - 2.0, 0.5 * k as f64)).collect();
        let b = m.matvec(&x_true);
        let x = hermitian_solve(&m, &b).expect("system is positive definite");
        for k in 0..n {
            assert!((x[k] - x_true[k]).norm() < 1e-10);
        }
    }
}
