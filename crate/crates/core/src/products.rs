//! The normalized product `Z_n = (I + X_n/n) ··· (I + X_1/n)` and its
//! expansion into degree-k terms.
//!
//! Throughout, products of sampled matrices put the larger index on the
//! left: `X_{j_k} ··· X_{j_1}` with `j_1 < ··· < j_k`.

use crate::error::{Error, Result};
use crate::linalg::{gemm_acc, mat_pow, Matrix};

/// `Z_n` together with its first `K` expansion terms `Z_{n,1}, ..., Z_{n,K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDecomposition {
    pub n: usize,
    pub d: usize,
    pub z_n: Matrix,
    /// `terms[k - 1]` is `Z_{n,k}`.
    pub terms: Vec<Matrix>,
}

impl ProductDecomposition {
    pub fn compute(xs: &[Matrix], depth: usize) -> Result<Self> {
        let z_n = z_product(xs, xs.len())?;
        let terms = elementary_terms(xs, depth)?;
        Ok(Self {
            n: xs.len(),
            d: z_n.rows(),
            z_n,
            terms,
        })
    }

    pub fn depth(&self) -> usize {
        self.terms.len()
    }

    /// `I + Σ_k Z_{n,k}` over the stored terms.
    pub fn reconstruct(&self) -> Matrix {
        let mut acc = Matrix::identity(self.d);
        for t in &self.terms {
            acc.axpy(1.0, t).expect("terms share the product's shape");
        }
        acc
    }
}

fn check_sequence(xs: &[Matrix]) -> Result<usize> {
    let first = xs.first().ok_or(Error::LengthMismatch {
        expected: 1,
        got: 0,
    })?;
    first.require_square()?;
    let d = first.rows();
    for x in xs {
        if x.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                op: "product",
                left: (d, d),
                right: x.shape(),
            });
        }
    }
    Ok(d)
}

/// `(I + xs[n-1]/n) ··· (I + xs[0]/n)`; `xs[j]` plays the role of `X_{j+1}`.
pub fn z_product(xs: &[Matrix], n: usize) -> Result<Matrix> {
    if xs.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: xs.len(),
        });
    }
    let d = check_sequence(xs)?;
    let inv_n = 1.0 / n as f64;
    let mut z = Matrix::identity(d);
    for x in xs {
        // z <- (I + x/n) z
        let mut next = z.clone();
        gemm_acc(&mut next, inv_n, x, &z);
        z = next;
    }
    if !z.is_finite() {
        return Err(Error::NonFinite("z_product"));
    }
    Ok(z)
}

/// `Z_{n,k}` for `k = 1..=depth`, where `n = xs.len()`.
///
/// Uses the recurrence `P_{m,k} = P_{m-1,k} + (X_m/n) P_{m-1,k-1}` with
/// `P_{m,0} = I`, so the whole table costs `O(n · depth)` products and the
/// `n^{-k}` normalization is folded in as the recursion proceeds.
pub fn elementary_terms(xs: &[Matrix], depth: usize) -> Result<Vec<Matrix>> {
    let n = xs.len();
    if depth > n {
        return Err(Error::DepthExceedsLength { k: depth, n });
    }
    let d = check_sequence(xs)?;
    let inv_n = 1.0 / n as f64;
    let mut p: Vec<Matrix> = std::iter::once(Matrix::identity(d))
        .chain((0..depth).map(|_| Matrix::zeros(d, d)))
        .collect();
    for (m, x) in xs.iter().enumerate() {
        let top = depth.min(m + 1);
        for k in (1..=top).rev() {
            let (lower, upper) = p.split_at_mut(k);
            gemm_acc(&mut upper[0], inv_n, x, &lower[k - 1]);
        }
    }
    p.remove(0);
    if p.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("elementary_terms"));
    }
    Ok(p)
}

/// `C(n, k) / n^k`, accumulated as a product of factors `(n - i) / (n (i + 1))`.
pub fn binomial_weight(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let nf = n as f64;
    (0..k).fold(1.0, |acc, i| {
        acc * (nf - i as f64) / (nf * (i as f64 + 1.0))
    })
}

/// `E[Z_{n,k}] = C(n,k) n^{-k} X^k`.
pub fn expected_znk(x_mean: &Matrix, n: usize, k: usize) -> Result<Matrix> {
    if k > n {
        return Err(Error::DepthExceedsLength { k, n });
    }
    Ok(mat_pow(x_mean, k as u64)?.scale(binomial_weight(n, k)))
}

/// `E[Z_n] = (I + X/n)^n`.
pub fn expected_zn(x_mean: &Matrix, n: usize) -> Result<Matrix> {
    x_mean.require_square()?;
    let step = x_mean.scale(1.0 / n as f64).add_identity(1.0)?;
    mat_pow(&step, n as u64)
}
