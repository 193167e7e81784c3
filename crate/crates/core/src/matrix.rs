//! Dense real matrices, norms and the thin singular value decomposition.
//!
//! Storage is row-major `f64`. Everything downstream (factors, gradients,
//! prox outputs) is carried as a [`DenseMatrix`].

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid shape {rows}x{cols} for {len} entries")]
    InvalidShape { rows: usize, cols: usize, len: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("svd did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries. Rejects empty shapes,
    /// length mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(MatrixError::InvalidShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        let m = Self { rows, cols, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, MatrixError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(MatrixError::InvalidShape {
                    rows: n_rows,
                    cols: n_cols,
                    len: data.len() + r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(n_rows, n_cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Square diagonal matrix.
    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self) -> Result<(), MatrixError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(MatrixError::NonFinite {
                row: k / self.cols,
                col: k % self.cols,
            }),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, MatrixError> {
        matmul(self, other)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `a * self + b * other`, entrywise.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Result<Self, MatrixError> {
        self.same_shape("lincomb", other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        })
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Self) -> Result<f64, MatrixError> {
        self.same_shape("dot", other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub(crate) fn same_shape(&self, op: &'static str, other: &Self) -> Result<(), MatrixError> {
        if self.shape() != other.shape() {
            return Err(MatrixError::DimensionMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

// Entrywise operators panic on shape mismatch; use `lincomb` for a fallible form.
impl Add for &DenseMatrix {
    type Output = DenseMatrix;

    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.lincomb(1.0, rhs, 1.0).expect("shape mismatch in add")
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;

    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.lincomb(1.0, rhs, -1.0).expect("shape mismatch in sub")
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;

    fn neg(self) -> DenseMatrix {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &DenseMatrix {
    type Output = DenseMatrix;

    fn mul(self, rhs: f64) -> DenseMatrix {
        self.scale(rhs)
    }
}

/// Standard matrix product `a * b`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
    if a.cols != b.rows {
        return Err(MatrixError::DimensionMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; m * n];
    // i-k-j order keeps the inner loop contiguous in both `b` and `out`.
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a.data[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let b_row = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aip * bv;
            }
        }
    }
    Ok(DenseMatrix {
        rows: m,
        cols: n,
        data: out,
    })
}

pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Thin SVD `a = u * diag(sigma) * vt` with `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub vt: DenseMatrix,
}

impl SvdFactors {
    /// `u * diag(values) * vt`; used for reconstruction and thresholding.
    pub fn recompose_with(&self, values: &[f64]) -> DenseMatrix {
        let k = self.sigma.len();
        debug_assert_eq!(values.len(), k);
        let (m, n) = (self.u.rows, self.vt.cols);
        let mut out = DenseMatrix::zeros(m, n);
        for (p, &s) in values.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for i in 0..m {
                let w = self.u.data[i * k + p] * s;
                if w == 0.0 {
                    continue;
                }
                let row = &mut out.data[i * n..(i + 1) * n];
                for (o, &v) in row.iter_mut().zip(&self.vt.data[p * n..(p + 1) * n]) {
                    *o += w * v;
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.recompose_with(&self.sigma)
    }
}

const JACOBI_TOL: f64 = 1e-15;
const SWEEPS_PER_COLUMN: usize = 100;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Columns of a working copy are rotated pairwise until mutually orthogonal;
/// column norms are then the singular values. Wide inputs are handled through
/// the transpose. Columns with negligible norm get their left singular vector
/// completed by Gram-Schmidt so `u` always has orthonormal columns.
///
/// Sign convention: the first nonzero entry of every left singular vector is
/// nonnegative.
pub fn svd(a: &DenseMatrix) -> Result<SvdFactors, MatrixError> {
    a.check_finite()?;
    if a.rows >= a.cols {
        let (u, sigma, v) = jacobi_tall(a)?;
        let mut f = SvdFactors {
            u,
            sigma,
            vt: v.transpose(),
        };
        normalize_signs(&mut f);
        Ok(f)
    } else {
        let (u, sigma, v) = jacobi_tall(&a.transpose())?;
        let mut f = SvdFactors {
            u: v,
            sigma,
            vt: u.transpose(),
        };
        normalize_signs(&mut f);
        Ok(f)
    }
}

/// Largest singular value.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64, MatrixError> {
    Ok(svd(a)?.sigma.first().copied().unwrap_or(0.0))
}

/// Sum of singular values.
pub fn nuclear_norm(a: &DenseMatrix) -> Result<f64, MatrixError> {
    Ok(svd(a)?.sigma.iter().sum())
}

// Returns (U m×n, sigma n, V n×n) for m >= n.
fn jacobi_tall(a: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix), MatrixError> {
    let (m, n) = a.shape();
    // Column-major working storage.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let max_sweeps = SWEEPS_PER_COLUMN * n.max(1);
    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged {
        if sweeps >= max_sweeps {
            return Err(MatrixError::NoConvergence { sweeps });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = column_products(&w[p], &w[q]);
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= JACOBI_TOL * (alpha.sqrt() * beta.sqrt()) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }

    let norms: Vec<f64> = w
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps ties deterministic.
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let negligible = sigma_max * (m as f64) * f64::EPSILON;

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (rank, &j) in order.iter().enumerate() {
        let s = norms[j];
        if s > negligible && s > f64::MIN_POSITIVE {
            u_cols.push(w[j].iter().map(|x| x / s).collect());
        } else {
            u_cols.push(vec![0.0; m]);
            pending.push(rank);
        }
    }
    complete_orthonormal(&mut u_cols, &pending, m);

    let u = DenseMatrix::from_fn(m, n, |i, j| u_cols[j][i]);
    let v_mat = DenseMatrix::from_fn(n, n, |i, j| v[order[j]][i]);
    Ok((u, sigma, v_mat))
}

fn column_products(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut a = 0.0;
    let mut b = 0.0;
    let mut g = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        a += xi * xi;
        b += yi * yi;
        g += xi * yi;
    }
    (a, b, g)
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *xp;
        let b = *xq;
        *xp = c * a - s * b;
        *xq = s * a + c * b;
    }
}

// Fills the `pending` columns with unit vectors orthogonal to every other column.
fn complete_orthonormal(cols: &mut [Vec<f64>], pending: &[usize], m: usize) {
    let mut basis = 0;
    for &slot in pending {
        while basis < m {
            let mut cand = vec![0.0; m];
            cand[basis] = 1.0;
            basis += 1;
            // Two Gram-Schmidt passes for numerical orthogonality.
            for _ in 0..2 {
                for (k, col) in cols.iter().enumerate() {
                    if k == slot || (pending.contains(&k) && col.iter().all(|&x| x == 0.0)) {
                        continue;
                    }
                    let proj: f64 = col.iter().zip(&cand).map(|(a, b)| a * b).sum();
                    for (c, &x) in cand.iter_mut().zip(col) {
                        *c -= proj * x;
                    }
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                cols[slot] = cand.iter().map(|x| x / norm).collect();
                break;
            }
        }
    }
}

fn normalize_signs(f: &mut SvdFactors) {
    let k = f.sigma.len();
    let (m, n) = (f.u.rows, f.vt.cols);
    for p in 0..k {
        let lead = (0..m).map(|i| f.u.data[i * k + p]).find(|x| x.abs() > 1e-12);
        if matches!(lead, Some(x) if x < 0.0) {
            for i in 0..m {
                f.u.data[i * k + p] = -f.u.data[i * k + p];
            }
            for j in 0..n {
                f.vt.data[p * n + j] = -f.vt.data[p * n + j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
            let mut s = 0.0;
            for p in 0..a.cols() {
                s += a[(i, p)] * b[(p, j)];
            }
            s
        })
    }

    /// Cyclic Jacobi eigenvalues of a symmetric matrix; independent of the SVD path.
    fn symmetric_eigenvalues(s: &DenseMatrix) -> Vec<f64> {
        let n = s.rows();
        let mut a = s.clone();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in 0..n {
                    if p != q {
                        off += a[(p, q)] * a[(p, q)];
                    }
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - sn * akq;
                        a[(k, q)] = sn * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - sn * aqk;
                        a[(q, k)] = sn * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    fn check_factors(a: &DenseMatrix, f: &SvdFactors) {
        let k = f.sigma.len();
        assert_eq!(k, a.rows().min(a.cols()));
        for w in f.sigma.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(f.sigma.iter().all(|&s| s >= 0.0));
        let utu = f.u.transpose().matmul(&f.u).unwrap();
        let vvt = f.vt.matmul(&f.vt.transpose()).unwrap();
        let eye = DenseMatrix::identity(k);
        assert!((&utu - &eye).frobenius_norm() <= 1e-10 * k as f64);
        assert!((&vvt - &eye).frobenius_norm() <= 1e-10 * k as f64);
        let err = (&f.reconstruct() - a).frobenius_norm();
        assert!(err <= 1e-8 * a.frobenius_norm().max(1.0), "reconstruction {err}");
    }

    #[test]
    fn new_rejects_bad_input() {
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0; 3]),
            Err(MatrixError::InvalidShape { .. })
        ));
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(MatrixError::NonFinite { row: 0, col: 1 })
        ));
        assert!(DenseMatrix::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn matmul_examples() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(DenseMatrix::identity(2).matmul(&a).unwrap(), a);
        let r = DenseMatrix::from_rows(&[[1.0, 2.0]])
            .unwrap()
            .matmul(&DenseMatrix::from_rows(&[[3.0], [4.0]]).unwrap())
            .unwrap();
        assert_eq!(r.as_slice(), &[11.0]);
        assert!(matches!(
            a.matmul(&DenseMatrix::zeros(3, 1)),
            Err(MatrixError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn matmul_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(5, 3, &mut rng);
        let b = random(3, 4, &mut rng);
        let fast = a.matmul(&b).unwrap();
        let slow = naive_matmul(&a, &b);
        for (x, y) in fast.as_slice().iter().zip(slow.as_slice()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(DenseMatrix::from_rows(&[[3.0, 4.0]]).unwrap().frobenius_norm(), 5.0);
        assert_eq!(DenseMatrix::zeros(3, 3).frobenius_norm(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(10, 10, &mut rng);
        let ata = a.transpose().matmul(&a).unwrap();
        let trace: f64 = (0..10).map(|i| ata[(i, i)]).sum();
        assert!((a.frobenius_norm() - trace.sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn svd_diagonal() {
        let f = svd(&DenseMatrix::from_diag(&[5.0, 2.0])).unwrap();
        assert_eq!(f.sigma, vec![5.0, 2.0]);
        assert!((&f.u - &DenseMatrix::identity(2)).frobenius_norm() < 1e-15);
        assert!((&f.vt - &DenseMatrix::identity(2)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn svd_rank_one() {
        let u = [0.6, 0.8, 0.0];
        let v = [1.0 / 2f64.sqrt(), 0.0, -1.0 / 2f64.sqrt(), 0.0];
        let a = DenseMatrix::from_fn(3, 4, |i, j| u[i] * v[j]);
        let f = svd(&a).unwrap();
        assert!((f.sigma[0] - 1.0).abs() < 1e-14);
        assert!(f.sigma[1..].iter().all(|&s| s < 1e-14));
        check_factors(&a, &f);
    }

    #[test]
    fn svd_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(8, 6, &mut rng);
        let f = svd(&a).unwrap();
        let ev = symmetric_eigenvalues(&a.transpose().matmul(&a).unwrap());
        for (s, e) in f.sigma.iter().zip(&ev) {
            assert!((s - e.max(0.0).sqrt()).abs() <= 1e-8, "{s} vs {e}");
        }
    }

    #[test]
    fn svd_wide_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random(3, 7, &mut rng);
        check_factors(&a, &svd(&a).unwrap());
        let z = DenseMatrix::zeros(4, 3);
        let f = svd(&z).unwrap();
        assert!(f.sigma.iter().all(|&s| s == 0.0));
        check_factors(&z, &f);
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut a = DenseMatrix::zeros(2, 2);
        a[(1, 0)] = f64::INFINITY;
        assert!(matches!(svd(&a), Err(MatrixError::NonFinite { .. })));
    }

    #[test]
    fn svd_sign_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(6, 4, &mut rng);
        let f = svd(&a).unwrap();
        for p in 0..4 {
            let lead = f.u.column(p).into_iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(lead > 0.0);
        }
        let g = svd(&a).unwrap();
        assert_eq!(f.u, g.u);
        assert_eq!(f.sigma, g.sigma);
    }

    #[test]
    fn spectral_norm_examples() {
        assert!((spectral_norm(&DenseMatrix::identity(3)).unwrap() - 1.0).abs() < 1e-15);
        assert!((spectral_norm(&DenseMatrix::from_diag(&[2.0, -7.0])).unwrap() - 7.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random(6, 6, &mut rng);
        // Power iteration on AᵀA.
        let ata = a.transpose().matmul(&a).unwrap();
        let mut x = DenseMatrix::from_fn(6, 1, |_, _| 1.0);
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let y = ata.matmul(&x).unwrap();
            lambda = y.frobenius_norm();
            x = y.scale(1.0 / lambda);
        }
        let s = spectral_norm(&a).unwrap();
        assert!((s - lambda.sqrt()).abs() <= 1e-6 * s);
    }

    #[test]
    fn random_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let m = rng.random_range(1..=50);
            let n = rng.random_range(1..=50);
            let a = random(m, n, &mut rng);
            let f = svd(&a).unwrap();
            check_factors(&a, &f);
            let s = f.sigma[0];
            assert!(s <= a.frobenius_norm() * (1.0 + 1e-12));
            let b = random(n, rng.random_range(1..=10), &mut rng);
            let ab = a.matmul(&b).unwrap();
            assert!(ab.frobenius_norm() <= s * b.frobenius_norm() * (1.0 + 1e-12));
        }
    }
}
