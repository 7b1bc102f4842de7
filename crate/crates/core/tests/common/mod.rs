//! Independent oracles and seeded instance generators shared by the
//! integration suites. Nothing here calls into the library's numerics.

#![allow(dead_code)]

use matprod_core::{EnsembleSpec, Matrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// A random ensemble of dimension `d`, cycling through every kind.
pub fn ensemble(rng: &mut ChaCha8Rng, d: usize, variant: usize) -> EnsembleSpec {
    let seed = rng.random();
    if d == 1 && variant.is_multiple_of(2) {
        let low = rng.random_range(-1.0..0.5);
        return EnsembleSpec::scalar_uniform(low, low + rng.random_range(0.1..1.5), seed).unwrap();
    }
    match variant % 3 {
        0 => EnsembleSpec::two_point(gaussian(rng, d, d, 0.5), gaussian(rng, d, d, 0.5), seed)
            .unwrap(),
        1 => EnsembleSpec::sign_perturbation(
            gaussian(rng, d, d, 0.3),
            gaussian(rng, d, d, 0.3),
            seed,
        )
        .unwrap(),
        _ => EnsembleSpec::rank_one_sphere(d, rng.random_range(0.2..2.0), seed).unwrap(),
    }
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Largest singular value through a full SVD.
pub fn svd_norm(m: &Matrix) -> f64 {
    to_na(m).singular_values().max()
}

pub fn na_exp(m: &Matrix) -> DMatrix<f64> {
    to_na(m).exp()
}

pub fn na_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// Textbook triple loop.
pub fn naive_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let (r, inner, c) = (a.rows(), a.cols(), b.cols());
    assert_eq!(inner, b.rows());
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[i * c + j] = (0..inner).map(|p| a.get(i, p) * b.get(p, j)).sum();
        }
    }
    Matrix::new(r, c, out).unwrap()
}

pub fn naive_pow(x: &Matrix, k: usize) -> Matrix {
    (0..k).fold(Matrix::identity(x.rows()), |acc, _| naive_mul(&acc, x))
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
