//! Dense complex matrices and the Hermitian kernels the rest of the crate is
//! built on.
//!
//! Storage is row-major. Vectors are represented as plain `Vec<C64>` (or as
//! single-column matrices where a matrix is needed).

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Entrywise tolerance on `|m - m†|` for a matrix to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues in `[-PSD_TOL, 0)` are clamped to zero; below that is an error.
pub const PSD_TOL: f64 = 1e-10;

const MAX_EIGEN_ITERATIONS: usize = 10_000;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Dense row-major complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!("{rows}x{cols} matrix is empty")));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidShape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { row: pos / cols, col: pos % cols });
        }
        Ok(Self { rows, cols, data })
    }

    /// Internal constructor for data produced by finite arithmetic.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![C64::default(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = re(1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_raw(rows, cols, data)
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::new(rows, cols, values.iter().map(|&x| re(x)).collect())
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { re(values[i]) } else { C64::default() })
    }

    /// Single-column matrix.
    pub fn column_vector(v: &[C64]) -> Self {
        Self::from_raw(v.len(), 1, v.to_vec())
    }

    /// `|v⟩⟨w|`.
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        Self::from_fn(v.len(), w.len(), |i, j| v[i] * w[j].conj())
    }

    /// `|v⟩⟨v|`.
    pub fn projector(v: &[C64]) -> Self {
        Self::outer(v, v)
    }

    /// Matrix unit `E_{kl}` of size `n`.
    pub fn unit(n: usize, k: usize, l: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(k, l)] = re(1.0);
        m
    }

    pub fn from_columns(cols: &[Vec<C64>]) -> Self {
        let ncols = cols.len();
        let nrows = cols[0].len();
        Self::from_fn(nrows, ncols, |i, j| cols[j][i])
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|z| z.conj()).collect())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|z| z * s).collect())
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|z| z * s).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |m_ij - conj(m_ji)|`; infinite for non-square input.
    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// `(m + m†)/2`.
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![C64::default(); n * m];
        for i in 0..n {
            let row = &mut out[i * m..(i + 1) * m];
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == C64::default() {
                    continue;
                }
                let orow = &other.data[l * m..(l + 1) * m];
                for (o, b) in row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        Self::from_raw(n, m, out)
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Row-major vectorisation, `vec(m)[i*cols + j] = m_ij`.
    pub fn vectorize(&self) -> Vec<C64> {
        self.data.clone()
    }

    pub fn from_vectorized(rows: usize, cols: usize, v: &[C64]) -> Self {
        Self::from_raw(rows, cols, v.to_vec())
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = C64::default();
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    /// Stacks real and imaginary parts so that a complex-linear operator acts
    /// on `R^{2n}` as `[[Re, -Im], [Im, Re]]`.
    pub fn realify(&self) -> Self {
        let (n, m) = (self.rows, self.cols);
        Self::from_fn(2 * n, 2 * m, |i, j| {
            let z = self[(i % n, j % m)];
            let v = match (i < n, j < m) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            };
            re(v)
        })
    }
}

/// `[Re v; Im v]` as a complex vector with zero imaginary parts.
pub fn realify_vec(v: &[C64]) -> Vec<C64> {
    v.iter().map(|z| re(z.re)).chain(v.iter().map(|z| re(z.im))).collect()
}

/// `⟨a|b⟩`, conjugate-linear in `a`.
pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vdist(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        ComplexMatrix::from_raw(self.rows, self.cols, self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape mismatch");
        ComplexMatrix::from_raw(self.rows, self.cols, self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(-1.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Spectral decomposition of a Hermitian matrix: `m = V diag(values) V†`,
/// eigenvalues ascending, eigenvectors as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// `V f(Λ) V†`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        let v = &self.vectors;
        ComplexMatrix::from_fn(n, n, |i, j| (0..n).map(|k| v[(i, k)] * fv[k] * v[(j, k)].conj()).sum())
    }
}

/// Eigendecomposition of a Hermitian matrix (Householder tridiagonalisation
/// and implicit QR), eigenvalues ascending.
pub fn hermitian_eigendecompose(m: &ComplexMatrix) -> Result<Eigen> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let dev = m.hermiticity_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }
    eigh(&m.hermitian_part())
}

/// Eigendecomposition of an exactly Hermitian input; no validation.
pub(crate) fn eigh(m: &ComplexMatrix) -> Result<Eigen> {
    let n = m.rows();
    let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m[(i, j)]);
    let eig = dm
        .try_symmetric_eigen(f64::EPSILON, MAX_EIGEN_ITERATIONS)
        .ok_or_else(|| Error::ConvergenceFailure(format!("Hermitian eigensolver did not converge on a {n}x{n} matrix")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(Eigen { values, vectors })
}

/// Square root of a positive semidefinite matrix. Eigenvalues in
/// `[-1e-10, 0)` are clamped to zero.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eigendecompose(m)?;
    let min = eig.values[0];
    if min < -PSD_TOL {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(eig.map_values(|x| x.max(0.0).sqrt()))
}

/// Kronecker product; the first factor indexes the row/column blocks.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac, br, bc) = (a.rows(), a.cols(), b.rows(), b.cols());
    ComplexMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Largest singular value, from the spectrum of `m†m` (or `mm†`, whichever is
/// smaller).
pub fn operator_norm(m: &ComplexMatrix) -> Result<f64> {
    let gram = if m.rows() >= m.cols() { m.adjoint().matmul(m) } else { m.matmul(&m.adjoint()) };
    let eig = eigh(&gram.hermitian_part())?;
    Ok(eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Moore-Penrose pseudo-inverse through the eigendecomposition of `m†m`,
/// discarding squared singular values below `rel_tol · max`. Also returns the
/// orthonormal basis of the discarded (numerical null) right singular space.
pub fn pseudo_inverse(m: &ComplexMatrix, rel_tol: f64) -> Result<(ComplexMatrix, Vec<Vec<C64>>)> {
    let gram = m.adjoint().matmul(m).hermitian_part();
    let eig = eigh(&gram)?;
    let n = gram.rows();
    let max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let cutoff = rel_tol * max;
    let mut inv_gram = ComplexMatrix::zeros(n, n);
    let mut null = Vec::new();
    for k in 0..n {
        let lambda = eig.values[k];
        let vk = eig.vector(k);
        if lambda > cutoff && lambda > 0.0 {
            let p = ComplexMatrix::projector(&vk).scale(1.0 / lambda);
            inv_gram = &inv_gram + &p;
        } else {
            null.push(vk);
        }
    }
    Ok((inv_gram.matmul(&m.adjoint()), null))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
    }

    fn reconstruct(e: &Eigen) -> ComplexMatrix {
        e.map_values(|x| x)
    }

    fn unitary_residual(u: &ComplexMatrix) -> f64 {
        u.adjoint().matmul(u).max_abs_diff(&ComplexMatrix::identity(u.cols()))
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(ComplexMatrix::new(2, 2, vec![re(1.0); 3]).is_err());
        assert!(matches!(
            ComplexMatrix::new(1, 2, vec![re(1.0), re(f64::NAN)]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(ComplexMatrix::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn identity_eigen() {
        let e = hermitian_eigendecompose(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        assert!(unitary_residual(&e.vectors) < 1e-12);
    }

    #[test]
    fn diagonal_eigen_sorted() {
        let e = hermitian_eigendecompose(&ComplexMatrix::diag_real(&[0.75, 0.25])).unwrap();
        assert!((e.values[0] - 0.25).abs() < 1e-15);
        assert!((e.values[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn pauli_x_eigenvectors() {
        let e = hermitian_eigendecompose(&sigma_x()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let minus = [re(h), re(-h)];
        let plus = [re(h), re(h)];
        assert!((vdot(&minus, &e.vector(0)).norm() - 1.0).abs() < 1e-12);
        assert!((vdot(&plus, &e.vector(1)).norm() - 1.0).abs() < 1e-12);
        assert!(reconstruct(&e).frobenius_distance(&sigma_x()) < 1e-12);
    }

    #[test]
    fn complex_hermitian_reconstruction() {
        let m = ComplexMatrix::new(
            3,
            3,
            vec![re(2.0), c(1.0, -1.0), c(0.0, 0.5), c(1.0, 1.0), re(-1.0), c(0.3, 0.0), c(0.0, -0.5), c(0.3, 0.0), re(0.5)],
        )
        .unwrap();
        let e = hermitian_eigendecompose(&m).unwrap();
        assert!(reconstruct(&e).frobenius_distance(&m) < 1e-12);
        assert!(unitary_residual(&e.vectors) < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn not_hermitian_is_rejected() {
        let m = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(hermitian_eigendecompose(&m), Err(Error::NotHermitian { .. })));
        let rect = ComplexMatrix::zeros(2, 3);
        assert!(matches!(hermitian_eigendecompose(&rect), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn sqrt_examples() {
        assert!(psd_sqrt(&ComplexMatrix::identity(3)).unwrap().max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
        let r = psd_sqrt(&ComplexMatrix::diag_real(&[4.0, 9.0])).unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::diag_real(&[2.0, 3.0])) < 1e-14);
    }

    #[test]
    fn sqrt_clamps_tiny_negative_and_rejects_large() {
        let r = psd_sqrt(&ComplexMatrix::diag_real(&[1.0, -5e-11])).unwrap();
        assert_eq!(r[(1, 1)], re(0.0));
        assert!(matches!(psd_sqrt(&ComplexMatrix::diag_real(&[1.0, -1e-6])), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn kron_examples() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        let zz = kron(&sigma_z(), &sigma_z());
        assert_eq!(zz, ComplexMatrix::diag_real(&[1.0, -1.0, -1.0, 1.0]));
        let a = sigma_x();
        let s = ComplexMatrix::new(1, 1, vec![c(0.0, 2.0)]).unwrap();
        assert_eq!(kron(&a, &s), a.scale_c(c(0.0, 2.0)));
    }

    #[test]
    fn operator_norm_examples() {
        assert!((operator_norm(&ComplexMatrix::identity(3)).unwrap() - 1.0).abs() < 1e-12);
        assert!((operator_norm(&ComplexMatrix::diag_real(&[3.0, -4.0])).unwrap() - 4.0).abs() < 1e-12);
        let col = ComplexMatrix::from_real(2, 1, &[1.0, 1.0]).unwrap();
        assert!((operator_norm(&col).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn realify_is_a_homomorphism() {
        let a = ComplexMatrix::new(2, 2, vec![c(1.0, 2.0), c(0.0, -1.0), c(3.0, 0.5), c(-1.0, 0.0)]).unwrap();
        let b = ComplexMatrix::new(2, 2, vec![c(0.2, 0.0), c(1.0, 1.0), c(0.0, 0.7), c(2.0, -1.0)]).unwrap();
        assert!(a.matmul(&b).realify().max_abs_diff(&a.realify().matmul(&b.realify())) < 1e-14);
        let v = vec![c(1.0, -1.0), c(0.5, 2.0)];
        assert!(vdist(&a.realify().matvec(&realify_vec(&v)), &realify_vec(&a.matvec(&v))) < 1e-14);
    }

    #[test]
    fn pseudo_inverse_of_rank_deficient() {
        let m = ComplexMatrix::from_real(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let (pinv, null) = pseudo_inverse(&m, 1e-12).unwrap();
        assert_eq!(null.len(), 2);
        assert!(m.matmul(&pinv).matmul(&m).max_abs_diff(&m) < 1e-14);
    }
}
