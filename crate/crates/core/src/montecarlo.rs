//! Seeded experiments that measure realized errors and compare them with the
//! bounds.
//!
//! Trial `t` at size `n` draws from the substream keyed by
//! `(master_seed, n, t)`, so records are identical no matter how the trials
//! are scheduled across threads.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{gamma_k, k_condition, lemma_tail_bound, tail_lemma_applies};
use crate::ensembles::{ensemble_bound, ensemble_mean, EnsembleSpec, SampleStream};
use crate::error::{Error, Result};
use crate::linalg::{expm, mat_mul, mat_pow, spectral_norm, Matrix};
use crate::products::{binomial_weight, elementary_terms, expected_zn, expected_znk, z_product};
use crate::stats::{linear_fit, median};

/// Minimum trials per grid point accepted by [`rate_fit`].
pub const RATE_FIT_MIN_TRIALS: usize = 30;
/// Minimum distinct grid points accepted by [`rate_fit`].
pub const RATE_FIT_MIN_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSpec,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub delta: f64,
    /// Number of expansion terms recorded per trial. `None` picks
    /// `min(n_min, ⌈log n_max⌉ + 2)`.
    pub depth: Option<usize>,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.n_grid.is_empty() {
            return bad("n_grid must not be empty");
        }
        if self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be positive and strictly increasing");
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(Error::InvalidDelta(self.delta));
        }
        if let Some(k) = self.depth {
            if k == 0 {
                return bad("depth must be at least 1");
            }
            if k > self.n_grid[0] {
                return Err(Error::DepthExceedsLength {
                    k,
                    n: self.n_grid[0],
                });
            }
        }
        Ok(())
    }

    /// The resolved truncation depth `K`.
    pub fn depth(&self) -> usize {
        self.depth.unwrap_or_else(|| default_depth(&self.n_grid))
    }
}

pub fn default_depth(n_grid: &[usize]) -> usize {
    let n_min = n_grid.iter().copied().min().unwrap_or(1);
    let n_max = n_grid.iter().copied().max().unwrap_or(1);
    let by_log = (n_max as f64).ln().ceil() as usize + 2;
    n_min.min(by_log).max(1)
}

/// Realized error norms of one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub n: usize,
    pub trial_index: usize,
    /// `‖Z_n - e^X‖`
    pub err_total: f64,
    /// `‖Z_n - E Z_n‖`
    pub err_mean_part: f64,
    /// `‖E Z_n - e^X‖`
    pub err_exp_part: f64,
    /// `term_errs[k - 1] = ‖Z_{n,k} - E Z_{n,k}‖`
    pub term_errs: Vec<f64>,
}

impl TrialRecord {
    pub fn is_finite(&self) -> bool {
        self.err_total.is_finite()
            && self.err_mean_part.is_finite()
            && self.err_exp_part.is_finite()
            && self.term_errs.iter().all(|v| v.is_finite())
    }
}

/// Quantities shared by every trial at one grid point.
struct GridPoint {
    n: usize,
    exp_x: Matrix,
    expected_zn: Matrix,
    expected_terms: Vec<Matrix>,
    err_exp_part: f64,
}

impl GridPoint {
    fn new(x_mean: &Matrix, n: usize, depth: usize) -> Result<Self> {
        let exp_x = expm(x_mean)?;
        let expected_zn = expected_zn(x_mean, n)?;
        let expected_terms = (1..=depth)
            .map(|k| expected_znk(x_mean, n, k))
            .collect::<Result<Vec<_>>>()?;
        let err_exp_part = spectral_norm(&expected_zn.sub(&exp_x)?);
        Ok(Self {
            n,
            exp_x,
            expected_zn,
            expected_terms,
            err_exp_part,
        })
    }

    fn trial(&self, spec: &EnsembleSpec, master_seed: u64, t: usize) -> Result<TrialRecord> {
        let mut stream =
            SampleStream::for_trial(spec.clone(), master_seed, self.n as u64, t as u64);
        let xs = stream.draw(self.n);
        let z = z_product(&xs, self.n)?;
        let terms = elementary_terms(&xs, self.expected_terms.len())?;
        let term_errs = terms
            .iter()
            .zip(&self.expected_terms)
            .map(|(t, e)| t.sub(e).map(|m| spectral_norm(&m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrialRecord {
            n: self.n,
            trial_index: t,
            err_total: spectral_norm(&z.sub(&self.exp_x)?),
            err_mean_part: spectral_norm(&z.sub(&self.expected_zn)?),
            err_exp_part: self.err_exp_part,
            term_errs,
        })
    }
}

/// `trials x |n_grid|` records, ordered by `n` then trial index.
pub fn run_error_trials(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let x_mean = ensemble_mean(&config.ensemble);
    let depth = config.depth();
    let mut records = Vec::with_capacity(config.trials * config.n_grid.len());
    for &n in &config.n_grid {
        let point = GridPoint::new(&x_mean, n, depth)?;
        let batch = (0..config.trials)
            .into_par_iter()
            .map(|t| point.trial(&config.ensemble, config.master_seed, t))
            .collect::<Result<Vec<_>>>()?;
        records.extend(batch);
    }
    Ok(records)
}

/// Fraction of records at size `n` whose degree-`k` error exceeds `threshold`.
pub fn term_exceedance(records: &[TrialRecord], n: usize, k: usize, threshold: f64) -> Option<f64> {
    let errs: Vec<f64> = records
        .iter()
        .filter(|r| r.n == n)
        .filter_map(|r| r.term_errs.get(k - 1).copied())
        .collect();
    if errs.is_empty() {
        return None;
    }
    Some(errs.iter().filter(|&&e| e > threshold).count() as f64 / errs.len() as f64)
}

/// Per grid point, the empirical frequency of `‖Z_{n,k} - E Z_{n,k}‖ > γ_k`,
/// with `L` taken from the ensemble.
pub fn tail_frequency(config: &ExperimentConfig, k: usize) -> Result<Vec<(usize, f64)>> {
    config.validate()?;
    if k == 0 || k > config.depth() {
        return Err(Error::DepthExceedsLength {
            k,
            n: config.depth(),
        });
    }
    let d = config.ensemble.dim();
    if let Some(&n) = config
        .n_grid
        .iter()
        .find(|&&n| !k_condition(k, n, d, config.delta))
    {
        return Err(Error::KCondition { k, n });
    }
    let records = run_error_trials(config)?;
    let l = ensemble_bound(&config.ensemble);
    Ok(config
        .n_grid
        .iter()
        .map(|&n| {
            let threshold = gamma_k(l, n, k, d, config.delta);
            (n, term_exceedance(&records, n, k, threshold).unwrap_or(0.0))
        })
        .collect())
}

/// `Σ_{k = ⌈log n⌉}^{n} ‖Z_{n,k} - E Z_{n,k}‖` computed at full depth.
pub fn realized_tail_sum(xs: &[Matrix], x_mean: &Matrix) -> Result<f64> {
    let n = xs.len();
    let terms = elementary_terms(xs, n)?;
    let k0 = ((n as f64).ln().ceil() as usize).max(1);
    let mut power = mat_pow(x_mean, (k0 - 1) as u64)?;
    let mut total = 0.0;
    for k in k0..=n {
        power = mat_mul(&power, x_mean)?;
        let expected = power.scale(binomial_weight(n, k));
        total += spectral_norm(&terms[k - 1].sub(&expected)?);
    }
    Ok(total)
}

/// Whether the realized tail sum respects `2Le² / (n(e-1))`. Requires
/// `⌈log n⌉ >= max{3, ⌈Le²⌉}`.
pub fn deterministic_tail_check(xs: &[Matrix], x_mean: &Matrix, l: f64) -> Result<bool> {
    let n = xs.len();
    if !tail_lemma_applies(l, n) {
        return Err(Error::Restriction(
            "tail-sum bound needs ceil(log n) >= max(3, ceil(L e^2))",
        ));
    }
    Ok(realized_tail_sum(xs, x_mean)? <= lemma_tail_bound(l, n))
}

/// `‖(I + x/n)^n - e^x‖` for each `n`.
pub fn exp_approx_check(x: &Matrix, n_grid: &[usize]) -> Result<Vec<(usize, f64)>> {
    let exp_x = expm(x)?;
    n_grid
        .iter()
        .map(|&n| {
            let approx = expected_zn(x, n)?;
            Ok((n, spectral_norm(&approx.sub(&exp_x)?)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub per_n_median: Vec<(usize, f64)>,
}

/// Least-squares fit of `log(median err_total)` against `log n`.
pub fn rate_fit(records: &[TrialRecord]) -> Result<RateFit> {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_n.entry(r.n).or_default().push(r.err_total);
    }
    if by_n.len() < RATE_FIT_MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "need at least {RATE_FIT_MIN_POINTS} distinct n, got {}",
            by_n.len()
        )));
    }
    let mut per_n_median = Vec::with_capacity(by_n.len());
    for (&n, errs) in &by_n {
        if errs.len() < RATE_FIT_MIN_TRIALS {
            return Err(Error::InsufficientData(format!(
                "n = {n} has {} trials, need {RATE_FIT_MIN_TRIALS}",
                errs.len()
            )));
        }
        let m = median(errs).expect("non-empty");
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InsufficientData(format!(
                "median error at n = {n} is {m}, cannot take its logarithm"
            )));
        }
        per_n_median.push((n, m));
    }
    let x: Vec<f64> = per_n_median.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let y: Vec<f64> = per_n_median.iter().map(|&(_, m)| m.ln()).collect();
    let (slope, intercept, r_squared) = linear_fit(&x, &y).expect("distinct n values");
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        per_n_median,
    })
}

/// Per `n`, the median of `√n |Z_n - 1|` for scalar draws from `spec`.
pub fn scalar_floor_with(
    spec: &EnsembleSpec,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    if spec.dim() != 1 {
        return Err(Error::InvalidEnsemble(
            "scalar floor needs a d = 1 ensemble".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    n_grid
        .iter()
        .map(|&n| {
            let scaled = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut stream =
                        SampleStream::for_trial(spec.clone(), seed, n as u64, t as u64);
                    let inv_n = 1.0 / n as f64;
                    let z: f64 = (0..n)
                        .map(|_| 1.0 + stream.next_matrix().get(0, 0) * inv_n)
                        .product();
                    (n as f64).sqrt() * (z - 1.0).abs()
                })
                .collect::<Vec<_>>();
            Ok((n, median(&scaled).unwrap_or(0.0)))
        })
        .collect()
}

/// [`scalar_floor_with`] for mean-zero Rademacher signs (`L = 1`).
pub fn scalar_floor_check(n_grid: &[usize], trials: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    scalar_floor_with(&EnsembleSpec::rademacher(seed), n_grid, trials, seed)
}
