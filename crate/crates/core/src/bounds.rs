//! Closed-form concentration bounds for `‖Z_n - e^X‖` and its pieces.
//!
//! All logarithms are natural. Every function here is a pure evaluator of
//! `(L, n, d, δ, k)`; the uniform bound `L` is always passed explicitly so a
//! caller can test a sharper value than the one an ensemble reports.

use serde::Serialize;
use std::f64::consts::E;

use crate::error::{Error, Result};

/// `(c / (k-1))^(k-1)` with the convention `(c/0)^0 = 1` at `k = 1`.
fn power_over_km1(c: f64, k: usize) -> f64 {
    if k <= 1 {
        1.0
    } else {
        let m = (k - 1) as f64;
        (c / m).powf(m)
    }
}

/// `(k-1) log(n e / (k-1))`, i.e. the log of `(ne/(k-1))^(k-1)`; zero at `k = 1`.
fn log_union_count(n: usize, k: usize) -> f64 {
    if k <= 1 {
        0.0
    } else {
        let m = (k - 1) as f64;
        m * ((n as f64) * E / m).ln()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidDelta(delta))
    }
}

/// Which side of the admissibility chain
/// `max{3, ⌈Le²⌉} <= log(n) + 1 <= (16n / (log(d/δ) + log(ne)))^{1/3}` holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Restriction {
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
    pub left_ok: bool,
    pub right_ok: bool,
}

impl Restriction {
    pub fn ok(&self) -> bool {
        self.left_ok && self.right_ok
    }

    /// Human-readable name of the first failing inequality.
    pub fn failure(&self) -> Option<&'static str> {
        if !self.left_ok {
            Some("left inequality")
        } else if !self.right_ok {
            Some("right inequality")
        } else {
            None
        }
    }
}

/// `(16n / (log(d/δ) + log(ne)))^{1/3}`.
fn k_ceiling(n: usize, d: usize, delta: f64) -> f64 {
    let nf = n as f64;
    (16.0 * nf / ((d as f64 / delta).ln() + (nf * E).ln())).cbrt()
}

pub fn restriction(l: f64, n: usize, d: usize, delta: f64) -> Result<Restriction> {
    check_delta(delta)?;
    let lower = 3f64.max((l * E * E).ceil());
    let middle = (n as f64).ln() + 1.0;
    let upper = k_ceiling(n, d, delta);
    Ok(Restriction {
        lower,
        middle,
        upper,
        left_ok: lower <= middle,
        right_ok: middle <= upper,
    })
}

pub fn restriction_ok(l: f64, n: usize, d: usize, delta: f64) -> Result<bool> {
    restriction(l, n, d, delta).map(|r| r.ok())
}

/// `k <= (16n / (log(d/δ) + log(ne)))^{1/3}`, non-strict.
pub fn k_condition(k: usize, n: usize, d: usize, delta: f64) -> bool {
    k as f64 <= k_ceiling(n, d, delta)
}

/// Bernstein part of the per-degree threshold:
/// `(4/√n) (e/(k-1))^{k-1} L^k √(log 2d + (k-1) log(ne/(k-1)) - log δ)`.
pub fn beta_k(l: f64, n: usize, k: usize, d: usize, delta: f64) -> f64 {
    let log_term = (2.0 * d as f64).ln() + log_union_count(n, k) - delta.ln();
    4.0 / (n as f64).sqrt() * power_over_km1(E, k) * l.powi(k as i32) * log_term.sqrt()
}

/// Deterministic bound on the contribution of the `p` peeled indices:
/// `2 (L(k-1)/n) (eL/(k-1))^{k-1}`.
pub fn d_k_remainder(l: f64, n: usize, k: usize) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    2.0 * l * (k - 1) as f64 / n as f64 * power_over_km1(E * l, k)
}

/// Per-degree deviation threshold: with probability at least `1 - δ^k`,
/// `‖Z_{n,k} - E Z_{n,k}‖ <= γ_k`.
pub fn gamma_k(l: f64, n: usize, k: usize, d: usize, delta: f64) -> f64 {
    let nf = n as f64;
    let log_term = (2.0 * d as f64 / delta).ln() + log_union_count(n, k);
    let bracket = 2.0 * l / nf.sqrt() * log_term.sqrt() + l * (k.max(1) - 1) as f64 / nf;
    2.0 * power_over_km1(E * l, k) * bracket
}

/// `‖(I + X/n)^n - e^X‖ <= σ² e^σ / (2n)` with `σ = ‖X‖`.
pub fn lemma_exp_bound(sigma: f64, n: usize) -> f64 {
    sigma * sigma * sigma.exp() / (2.0 * n as f64)
}

/// Deterministic bound `2Le² / (n(e-1))` on `Σ_{k >= ⌈log n⌉} ‖Z_{n,k} - E Z_{n,k}‖`.
pub fn lemma_tail_bound(l: f64, n: usize) -> f64 {
    2.0 * l * E * E / (n as f64 * (E - 1.0))
}

/// Whether the tail-sum bound applies: `⌈log n⌉ >= max{3, ⌈Le²⌉}`.
pub fn tail_lemma_applies(l: f64, n: usize) -> bool {
    (n as f64).ln().ceil() >= 3f64.max((l * E * E).ceil())
}

fn main_term(l: f64, n: usize, d: usize, delta: f64) -> f64 {
    let nf = n as f64;
    let log_n = nf.ln();
    2.0 * l * l.exp() * log_n / nf.sqrt()
        * (2.0 * ((2.0 * d as f64 / delta).ln() + log_n * log_n).sqrt() + log_n / nf.sqrt())
}

/// The high-probability bound on `‖Z_n - e^X‖`, valid with probability at
/// least `1 - 2δ` when the admissibility chain holds.
pub fn theorem_bound(l: f64, n: usize, d: usize, delta: f64) -> Result<f64> {
    if let Some(reason) = restriction(l, n, d, delta)?.failure() {
        return Err(Error::Restriction(reason));
    }
    Ok(main_term(l, n, d, delta) + l * l * l.exp() / (2.0 * n as f64))
}

/// The `δ` at which the expectation bound is evaluated: `L² / (8n)`.
pub fn expectation_delta(l: f64, n: usize) -> f64 {
    l * l / (8.0 * n as f64)
}

/// Bound on `E‖Z_n - e^X‖` obtained by integrating the tail at `δ = L²/(8n)`.
pub fn expectation_bound(l: f64, n: usize, d: usize) -> Result<f64> {
    let delta = expectation_delta(l, n);
    if let Some(reason) = restriction(l, n, d, delta)?.failure() {
        return Err(Error::Restriction(reason));
    }
    Ok(main_term(l, n, d, delta) + l * l * l.exp() / n as f64)
}

/// Matrix Bernstein tail bound `(d₁ + d₂) exp(-(t²/2) / (v + Lt/3))`.
///
/// This is a bound, not a probability, and may exceed one.
pub fn bernstein_tail(v: f64, l: f64, t: f64, d1: usize, d2: usize) -> f64 {
    let dims = (d1 + d2) as f64;
    if t == 0.0 {
        return dims;
    }
    dims * (-(t * t / 2.0) / (v + l * t / 3.0)).exp()
}

/// Number of per-degree thresholds reported: `⌈log n⌉`.
pub fn gamma_depth(n: usize) -> usize {
    (n as f64).ln().ceil().max(0.0) as usize
}

/// Every bound for one parameter point, as emitted by the `bounds` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    #[serde(rename = "L")]
    pub l: f64,
    pub n: usize,
    pub d: usize,
    pub delta: f64,
    pub restriction_ok: bool,
    pub restriction_failure: Option<&'static str>,
    pub restriction: Restriction,
    /// `gamma[k - 1]` is `γ_k` for `k = 1..=⌈log n⌉`.
    pub gamma: Vec<f64>,
    pub theorem_bound: Option<f64>,
    pub lemma_exp_bound: f64,
    pub lemma_tail_bound: f64,
    pub expectation_bound: Option<f64>,
}

impl BoundReport {
    pub fn evaluate(l: f64, n: usize, d: usize, delta: f64) -> Result<Self> {
        let r = restriction(l, n, d, delta)?;
        Ok(Self {
            l,
            n,
            d,
            delta,
            restriction_ok: r.ok(),
            restriction_failure: r.failure(),
            restriction: r,
            gamma: (1..=gamma_depth(n))
                .map(|k| gamma_k(l, n, k, d, delta))
                .collect(),
            theorem_bound: theorem_bound(l, n, d, delta).ok(),
            lemma_exp_bound: lemma_exp_bound(l, n),
            lemma_tail_bound: lemma_tail_bound(l, n),
            expectation_bound: expectation_bound(l, n, d).ok(),
        })
    }
}
