//! Dense real matrices.
//!
//! A small row-major matrix type together with the handful of kernels the
//! rest of the crate needs: products, integer powers, the spectral norm and
//! the matrix exponential. Dimensions in this crate stay small (d <= 64), so
//! everything is dense and unblocked.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Convergence target for the residual of power iteration, relative to the
/// current eigenvalue estimate.
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;

/// Scaled norm at or below which the Taylor series is evaluated directly.
const EXPM_THETA: f64 = 0.5;
/// Absolute truncation target for the Taylor series at the scaled norm.
const EXPM_TRUNCATION: f64 = 1e-17;

/// A dense `rows x cols` real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting empty shapes and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyDimension);
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidData {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Matrix::new"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::InvalidData {
                    expected: cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m.data[i * d + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = Self::zeros(d, d);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * d + i] = v;
        }
        m
    }

    /// A 1x1 matrix.
    pub fn scalar(v: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
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

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_same_shape(other, "axpy")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// Adds `alpha` to every diagonal entry of a square matrix.
    pub fn add_identity(&self, alpha: f64) -> Result<Self> {
        self.require_square()?;
        let mut m = self.clone();
        for i in 0..self.rows {
            m.data[i * self.cols + i] += alpha;
        }
        Ok(m)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        self.data
            .chunks(self.cols)
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub(crate) fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            })
        }
    }

    fn zip_with(
        &self,
        other: &Self,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        self.check_same_shape(other, op)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

/// `out += alpha * a * b` without shape checks. Callers guarantee
/// `a.cols == b.rows` and `out` is `a.rows x b.cols`.
pub(crate) fn gemm_acc(out: &mut Matrix, alpha: f64, a: &Matrix, b: &Matrix) {
    let (n, m, p) = (a.rows, a.cols, b.cols);
    for i in 0..n {
        let out_row = &mut out.data[i * p..(i + 1) * p];
        for l in 0..m {
            let s = alpha * a.data[i * m + l];
            if s == 0.0 {
                continue;
            }
            let b_row = &b.data[l * p..(l + 1) * p];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += s * bv;
            }
        }
    }
}

/// Standard matrix product `a * b`.
pub fn mat_mul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            op: "mat_mul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    gemm_acc(&mut out, 1.0, a, b);
    if !out.is_finite() {
        return Err(Error::NonFinite("mat_mul"));
    }
    Ok(out)
}

/// `x^m` by repeated squaring; `x^0 = I`.
pub fn mat_pow(x: &Matrix, m: u64) -> Result<Matrix> {
    x.require_square()?;
    let mut result = Matrix::identity(x.rows);
    let mut base = x.clone();
    let mut e = m;
    while e > 0 {
        if e & 1 == 1 {
            result = mat_mul(&result, &base).map_err(|_| Error::NonFinite("mat_pow"))?;
        }
        e >>= 1;
        if e > 0 {
            base = mat_mul(&base, &base).map_err(|_| Error::NonFinite("mat_pow"))?;
        }
    }
    Ok(result)
}

/// Largest singular value.
///
/// Runs power iteration on the smaller Gram matrix (`AᵀA` or `AAᵀ`) until
/// the eigen-residual drops below `1e-12` of the Rayleigh quotient. If that
/// never happens within the iteration cap, or the estimate falls below a
/// diagonal entry (a sign the start vector missed the dominant eigenspace),
/// the eigenvalues are recomputed with cyclic Jacobi.
pub fn spectral_norm(a: &Matrix) -> f64 {
    let gram = if a.cols <= a.rows {
        mat_mul_unchecked(&a.transpose(), a)
    } else {
        mat_mul_unchecked(a, &a.transpose())
    };
    let max_diag = (0..gram.rows).map(|i| gram.get(i, i)).fold(0.0, f64::max);
    if max_diag == 0.0 {
        return 0.0;
    }
    let lambda = match power_iteration(&gram) {
        Some(l) if l >= max_diag * (1.0 - 1e-14) => l,
        _ => symmetric_eigenvalues(&gram).into_iter().fold(0.0, f64::max),
    };
    lambda.max(0.0).sqrt()
}

fn mat_mul_unchecked(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows, b.cols);
    gemm_acc(&mut out, 1.0, a, b);
    out
}

fn power_iteration(b: &Matrix) -> Option<f64> {
    let d = b.rows;
    // Irrational offsets keep the start vector away from any coordinate
    // subspace.
    let mut v: Vec<f64> = (0..d)
        .map(|i| 1.0 + ((i as f64 + 1.0) * std::f64::consts::SQRT_2).fract())
        .collect();
    normalize(&mut v);
    let mut w = vec![0.0; d];
    for _ in 0..POWER_MAX_ITER {
        sym_mat_vec(b, &v, &mut w);
        let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let residual = v
            .iter()
            .zip(&w)
            .map(|(vi, wi)| (wi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if lambda > 0.0 && residual <= POWER_TOL * lambda {
            return Some(lambda);
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    None
}

fn sym_mat_vec(b: &Matrix, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = b.data[i * b.cols..(i + 1) * b.cols]
            .iter()
            .zip(v)
            .map(|(x, y)| x * y)
            .sum();
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations. Only the
/// upper triangle's symmetry is assumed, not checked.
pub fn symmetric_eigenvalues(b: &Matrix) -> Vec<f64> {
    let n = b.rows;
    let mut a = b.data.clone();
    let scale = b.frobenius_norm();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q].powi(2))
            .sum();
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Matrix exponential by scaling and squaring around a truncated Taylor
/// series.
pub fn expm(x: &Matrix) -> Result<Matrix> {
    x.require_square()?;
    let d = x.rows;
    let theta = x.frobenius_norm().min((x.one_norm() * x.inf_norm()).sqrt());
    if theta == 0.0 {
        return Ok(Matrix::identity(d));
    }
    let squarings = if theta > EXPM_THETA {
        (theta / EXPM_THETA).log2().ceil() as i32
    } else {
        0
    };
    let scaled = x.scale(0.5f64.powi(squarings));
    let theta_s = theta * 0.5f64.powi(squarings);

    // Smallest degree whose remainder bound clears the truncation target.
    let mut degree = 1usize;
    let mut term_bound = theta_s;
    loop {
        let next = term_bound * theta_s / (degree as f64 + 1.0);
        let tail = next / (1.0 - theta_s / (degree as f64 + 2.0));
        if tail < EXPM_TRUNCATION {
            break;
        }
        term_bound = next;
        degree += 1;
    }

    // Horner: I + A(I + A/2(I + A/3(...)))
    let mut acc = Matrix::identity(d);
    for j in (1..=degree).rev() {
        let mut next = Matrix::identity(d);
        gemm_acc(&mut next, 1.0 / j as f64, &scaled, &acc);
        acc = next;
    }
    for _ in 0..squarings {
        acc = mat_mul_unchecked(&acc, &acc);
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite("expm"));
    }
    Ok(acc)
}
