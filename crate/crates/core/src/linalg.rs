//! Dense complex linear algebra.
//!
//! [`Matrix`] is a row-major complex matrix. Singular values come from a
//! bidiagonalization SVD; from them we derive approximation numbers and
//! Schatten norms. The matrix exponential uses degree-13 Padé approximation
//! with scaling and squaring.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6e}{:+.6e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    /// Builds a matrix from row-major entries, rejecting wrong counts and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("matrix dimensions must be positive, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Input("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix without the finiteness scan. Used on internal paths
    /// where entries come from finite arithmetic.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|row| row.iter().map(|&x| C64::new(x, 0.0))).collect();
        Self::new(r, c, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![ZERO; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diag(&d)
    }

    pub fn scalar(n: usize, value: C64) -> Self {
        Self::from_diag(&vec![value; n])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&z| z * s).collect())
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&z| z * s).collect())
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: C64, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "axpy shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.data[i * self.cols + i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.data[r * self.cols + c].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Operator (spectral) norm.
    pub fn op_norm(&self) -> f64 {
        svd(self).map(|s| s.largest()).unwrap_or(f64::NAN)
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let (m, k, n) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![ZERO; m * n];
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self::from_raw(m, n, out))
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!("vector of length {} for {} columns", v.len(), self.cols)));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// Copy of the `rows x cols` block with top-left corner `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        let mut out = Self::zeros(rows, cols);
        for r in 0..rows {
            let src = &self.data[(r0 + r) * self.cols + c0..(r0 + r) * self.cols + c0 + cols];
            out.data[r * cols..(r + 1) * cols].copy_from_slice(src);
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for r in 0..block.rows {
            let dst = (r0 + r) * self.cols + c0;
            self.data[dst..dst + block.cols].copy_from_slice(&block.data[r * block.cols..(r + 1) * block.cols]);
        }
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self.data[r * self.cols + c]).collect()
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> Matrix {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(m[(r, c)]);
            }
        }
        Self::from_raw(rows, cols, data)
    }

    /// Inverse of a square matrix via LU with partial pivoting.
    pub fn inverse(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::Shape(format!("cannot invert a {}x{} matrix", self.rows, self.cols)));
        }
        let inv = self
            .to_nalgebra()
            .try_inverse()
            .ok_or_else(|| Error::Input("matrix is singular".into()))?;
        let out = Self::from_nalgebra(&inv);
        if !out.is_finite() {
            return Err(Error::Input("matrix is numerically singular".into()));
        }
        Ok(out)
    }

    /// Solves `self * X = rhs`.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        if !self.is_square() || self.rows != rhs.rows {
            return Err(Error::Shape("solve: incompatible shapes".into()));
        }
        let lu = self.to_nalgebra().lu();
        let x = lu
            .solve(&rhs.to_nalgebra())
            .ok_or_else(|| Error::Input("matrix is singular".into()))?;
        Ok(Self::from_nalgebra(&x))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of bounds");
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of bounds");
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        Matrix::from_raw(self.rows, self.cols, self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape mismatch");
        Matrix::from_raw(self.rows, self.cols, self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect())
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

/// Singular values, nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpectrum {
    values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// ℓ^p norm of the values; `p = ∞` gives the largest value.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let top = self.largest();
        if top == 0.0 {
            return 0.0;
        }
        if p.is_infinite() {
            return top;
        }
        if p == 1.0 {
            return self.values.iter().sum();
        }
        // scaled to avoid overflow for large p
        top * self.values.iter().map(|v| (v / top).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Full singular value decomposition `A = U diag(σ) V^H` with σ nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: SingularSpectrum,
    pub v: Matrix,
}

fn check_finite(a: &Matrix) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(Error::Input("matrix has non-finite entries".into()))
    }
}

/// Singular values of `a`.
pub fn svd(a: &Matrix) -> Result<SingularSpectrum> {
    check_finite(a)?;
    let values = a
        .to_nalgebra()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Input("SVD did not converge".into()))?
        .singular_values;
    Ok(SingularSpectrum::new(values.iter().map(|v| v.max(0.0)).collect()))
}

/// Singular values together with left and right singular vectors (columns of
/// `u` and `v`), sorted so that σ is nonincreasing.
pub fn svd_full(a: &Matrix) -> Result<Svd> {
    check_finite(a)?;
    let dec = a
        .to_nalgebra()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Input("SVD did not converge".into()))?;
    let u = dec.u.expect("u requested");
    let v_t = dec.v_t.expect("v requested");
    let k = dec.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| dec.singular_values[j].total_cmp(&dec.singular_values[i]));
    let mut um = Matrix::zeros(a.rows, k);
    let mut vm = Matrix::zeros(a.cols, k);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..a.rows {
            um[(r, dst)] = u[(r, src)];
        }
        for r in 0..a.cols {
            vm[(r, dst)] = v_t[(src, r)].conj();
        }
    }
    let sigma = SingularSpectrum::new(order.iter().map(|&i| dec.singular_values[i].max(0.0)).collect());
    Ok(Svd { u: um, sigma, v: vm })
}

/// Approximation numbers α_r(A), r = 1..min(rows, cols). For matrices the
/// infimum over rank-(<r) perturbations is attained by truncated SVD, so
/// these coincide with the singular values.
pub fn approximation_numbers(a: &Matrix) -> Result<SingularSpectrum> {
    svd(a)
}

/// Schatten p-norm. `p = f64::INFINITY` returns the operator norm.
pub fn schatten_norm(a: &Matrix, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Parameter(format!("Schatten exponent must be >= 1, got {p}")));
    }
    Ok(svd(a)?.lp_norm(p))
}

/// Smallest singular value over largest; infinite for singular matrices.
pub fn condition_number(a: &Matrix) -> Result<f64> {
    let s = svd(a)?;
    let smallest = s.values().last().copied().unwrap_or(0.0);
    if smallest == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(s.largest() / smallest)
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by degree-13 Padé approximation with scaling and
/// squaring.
pub fn matrix_exp(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::Shape(format!("matrix_exp needs a square matrix, got {}x{}", a.rows, a.cols)));
    }
    check_finite(a)?;
    let n = a.rows;
    let norm = a.norm_1();
    if norm == 0.0 {
        return Ok(Matrix::identity(n));
    }
    let squarings = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.scale_real(0.5f64.powi(squarings));

    let id = Matrix::identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| C64::new(PADE13[k], 0.0);

    let mut inner_u = a6.scale(b(13));
    inner_u.axpy(b(11), &a4);
    inner_u.axpy(b(9), &a2);
    let mut u_tail = &a6 * &inner_u;
    u_tail.axpy(b(7), &a6);
    u_tail.axpy(b(5), &a4);
    u_tail.axpy(b(3), &a2);
    u_tail.axpy(b(1), &id);
    let u = &a * &u_tail;

    let mut inner_v = a6.scale(b(12));
    inner_v.axpy(b(10), &a4);
    inner_v.axpy(b(8), &a2);
    let mut v = &a6 * &inner_v;
    v.axpy(b(6), &a6);
    v.axpy(b(4), &a4);
    v.axpy(b(2), &a2);
    v.axpy(b(0), &id);

    let mut r = (&v - &u).solve(&(&v + &u))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn identity_singular_values() {
        assert_eq!(svd(&Matrix::identity(3)).unwrap().values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_operator_singular_values() {
        let s = svd(&Matrix::zeros(2, 4)).unwrap();
        assert_eq!(s.values(), &[0.0, 0.0]);
    }

    #[test]
    fn diagonal_singular_values_sorted() {
        // eigenvalues of A*A are 9 and 16
        let a = Matrix::from_real_diag(&[3.0, 4.0]);
        let s = svd(&a).unwrap();
        assert!((s.values()[0] - 4.0).abs() < 1e-14);
        assert!((s.values()[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(Matrix::new(1, 1, vec![C64::new(f64::NAN, 0.0)]), Err(Error::Input(_))));
        let mut m = Matrix::identity(2);
        m.as_mut_slice()[0] = C64::new(f64::INFINITY, 0.0);
        assert!(matches!(svd(&m), Err(Error::Input(_))));
    }

    #[test]
    fn schatten_examples() {
        assert!((schatten_norm(&Matrix::identity(3), 1.0).unwrap() - 3.0).abs() < 1e-14);
        let d = Matrix::from_real_diag(&[4.0, 3.0]);
        assert!((schatten_norm(&d, 2.0).unwrap() - 5.0).abs() < 1e-14);
        assert!((schatten_norm(&d, f64::INFINITY).unwrap() - 4.0).abs() < 1e-14);
        assert!(matches!(schatten_norm(&d, 0.5), Err(Error::Parameter(_))));
    }

    #[test]
    fn rank_one_approximation_numbers() {
        let u = [c(1.0), c(2.0), C64::new(0.0, 2.0)];
        let v = [c(3.0), c(4.0)];
        let mut a = Matrix::zeros(3, 2);
        for i in 0..3 {
            for j in 0..2 {
                a[(i, j)] = u[i] * v[j].conj();
            }
        }
        let s = approximation_numbers(&a).unwrap();
        assert!((s.values()[0] - 3.0 * 5.0).abs() < 1e-12);
        assert!(s.values()[1].abs() < 1e-12);
    }

    #[test]
    fn exp_examples() {
        assert_eq!(matrix_exp(&Matrix::zeros(3, 3)).unwrap(), Matrix::identity(3));
        let e = matrix_exp(&Matrix::from_real_diag(&[2f64.ln()])).unwrap();
        assert!((e[(0, 0)] - c(2.0)).norm() < 1e-15);
        let nil = Matrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let e = matrix_exp(&nil).unwrap();
        let expected = Matrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert!((&e - &expected).max_abs() < 1e-15);
        assert!(matches!(matrix_exp(&Matrix::zeros(2, 3)), Err(Error::Shape(_))));
    }

    #[test]
    fn exp_large_norm_diagonal() {
        // scaling and squaring path; exact oracle is the scalar exponential
        let d = [-20.0, 3.5, 30.0];
        let e = matrix_exp(&Matrix::from_real_diag(&d)).unwrap();
        for (i, &x) in d.iter().enumerate() {
            assert!((e[(i, i)].re - x.exp()).abs() <= 1e-13 * x.exp(), "entry {i}");
        }
    }

    #[test]
    fn svd_full_reconstructs() {
        let a = Matrix::new(
            2,
            3,
            vec![c(1.0), C64::new(0.5, -1.0), c(2.0), c(0.0), C64::new(0.0, 3.0), c(-1.0)],
        )
        .unwrap();
        let d = svd_full(&a).unwrap();
        let sig = Matrix::from_real_diag(d.sigma.values());
        let rec = &(&d.u * &sig) * &d.v.adjoint();
        assert!((&rec - &a).max_abs() < 1e-13);
    }
}
