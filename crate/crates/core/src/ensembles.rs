//! Bounded random-matrix sources with a known common mean.
//!
//! Every draw is a pure function of a 256-bit ChaCha key and the draw index:
//! the key selects the generator and the index selects the ChaCha stream. A
//! stream can therefore be cloned, resumed, or split across threads without
//! changing which matrix sits at which index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, Matrix};

/// Enumeration of finite-support ensembles is capped at this many outcomes.
pub const MAX_OUTCOMES: usize = 1 << 20;

/// Domain tags separating the key spaces of plain and per-trial streams.
const TAG_PLAIN: u64 = 0x706c_6169_6e00_0000;
const TAG_TRIAL: u64 = 0x7472_6961_6c00_0000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleKind {
    /// `A` or `B` with probability 1/2 each.
    TwoPoint { a: Matrix, b: Matrix },
    /// `center + s * direction` with a Rademacher sign `s`.
    SignPerturbation { center: Matrix, direction: Matrix },
    /// `radius^2 * v vᵀ` with `v` uniform on the unit sphere in `R^d`.
    RankOneSphere { d: usize, radius: f64 },
    /// A 1x1 matrix uniform on `[low, high]`.
    ScalarUniform { low: f64, high: f64 },
}

impl EnsembleKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnsembleKind::TwoPoint { .. } => "two_point",
            EnsembleKind::SignPerturbation { .. } => "sign_perturbation",
            EnsembleKind::RankOneSphere { .. } => "rank_one_sphere",
            EnsembleKind::ScalarUniform { .. } => "scalar_uniform",
        }
    }
}

/// A validated ensemble description plus its seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSpec {
    #[serde(flatten)]
    kind: EnsembleKind,
    seed: u64,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, seed: u64) -> Result<Self> {
        let invalid = |m: &str| Err(Error::InvalidEnsemble(m.to_string()));
        match &kind {
            EnsembleKind::TwoPoint { a: x, b: y }
            | EnsembleKind::SignPerturbation {
                center: x,
                direction: y,
            } => {
                if !x.is_square() {
                    return Err(Error::NotSquare {
                        rows: x.rows(),
                        cols: x.cols(),
                    });
                }
                if x.shape() != y.shape() {
                    return Err(Error::DimensionMismatch {
                        op: "ensemble",
                        left: x.shape(),
                        right: y.shape(),
                    });
                }
            }
            EnsembleKind::RankOneSphere { d, radius } => {
                if *d == 0 {
                    return invalid("rank_one_sphere needs d >= 1");
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return invalid("rank_one_sphere needs a positive finite radius");
                }
            }
            EnsembleKind::ScalarUniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return invalid("scalar_uniform needs finite low <= high");
                }
            }
        }
        Ok(Self { kind, seed })
    }

    pub fn two_point(a: Matrix, b: Matrix, seed: u64) -> Result<Self> {
        Self::new(EnsembleKind::TwoPoint { a, b }, seed)
    }

    pub fn sign_perturbation(center: Matrix, direction: Matrix, seed: u64) -> Result<Self> {
        Self::new(EnsembleKind::SignPerturbation { center, direction }, seed)
    }

    pub fn rank_one_sphere(d: usize, radius: f64, seed: u64) -> Result<Self> {
        Self::new(EnsembleKind::RankOneSphere { d, radius }, seed)
    }

    pub fn scalar_uniform(low: f64, high: f64, seed: u64) -> Result<Self> {
        Self::new(EnsembleKind::ScalarUniform { low, high }, seed)
    }

    /// Mean-zero scalar signs, `x = ±1`.
    pub fn rademacher(seed: u64) -> Self {
        Self::two_point(Matrix::scalar(1.0), Matrix::scalar(-1.0), seed).expect("valid scalars")
    }

    pub fn kind(&self) -> &EnsembleKind {
        &self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            kind: self.kind.clone(),
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            EnsembleKind::TwoPoint { a, .. } => a.rows(),
            EnsembleKind::SignPerturbation { center, .. } => center.rows(),
            EnsembleKind::RankOneSphere { d, .. } => *d,
            EnsembleKind::ScalarUniform { .. } => 1,
        }
    }
}

/// Closed-form common mean `E[X_k]`.
pub fn ensemble_mean(spec: &EnsembleSpec) -> Matrix {
    match &spec.kind {
        EnsembleKind::TwoPoint { a, b } => a.add(b).expect("validated shapes").scale(0.5),
        EnsembleKind::SignPerturbation { center, .. } => center.clone(),
        EnsembleKind::RankOneSphere { d, radius } => {
            Matrix::identity(*d).scale(radius * radius / *d as f64)
        }
        EnsembleKind::ScalarUniform { low, high } => Matrix::scalar(0.5 * (low + high)),
    }
}

/// A uniform bound `L` with `‖X_k‖ <= L` for every draw.
///
/// Degenerate ensembles whose every draw is the zero matrix report `0`.
pub fn ensemble_bound(spec: &EnsembleSpec) -> f64 {
    match &spec.kind {
        EnsembleKind::TwoPoint { a, b } => spectral_norm(a).max(spectral_norm(b)),
        EnsembleKind::SignPerturbation { center, direction } => {
            spectral_norm(center) + spectral_norm(direction)
        }
        EnsembleKind::RankOneSphere { radius, .. } => radius * radius,
        EnsembleKind::ScalarUniform { low, high } => low.abs().max(high.abs()),
    }
}

/// A reproducible sequence `X_1, X_2, ...` drawn from one ensemble.
#[derive(Debug, Clone)]
pub struct SampleStream {
    spec: EnsembleSpec,
    key: [u8; 32],
    counter: u64,
}

impl SampleStream {
    /// Stream keyed by the ensemble's own seed.
    pub fn new(spec: EnsembleSpec) -> Self {
        let key = key_from_words([spec.seed, 0, 0, TAG_PLAIN]);
        Self {
            spec,
            key,
            counter: 0,
        }
    }

    /// Independent substream for trial `trial` of an experiment at size `n`.
    /// The ensemble's own seed is ignored.
    pub fn for_trial(spec: EnsembleSpec, master_seed: u64, n: u64, trial: u64) -> Self {
        let key = key_from_words([master_seed, n, trial, TAG_TRIAL]);
        Self {
            spec,
            key,
            counter: 0,
        }
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    /// Index of the next draw.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// The matrix at `index`, independent of the stream position.
    pub fn draw_at(&self, index: u64) -> Matrix {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        sample(&self.spec.kind, &mut rng)
    }

    pub fn next_matrix(&mut self) -> Matrix {
        let m = self.draw_at(self.counter);
        self.counter += 1;
        m
    }

    /// The next `count` draws, advancing the counter.
    pub fn draw(&mut self, count: usize) -> Vec<Matrix> {
        (0..count).map(|_| self.next_matrix()).collect()
    }
}

fn key_from_words(words: [u64; 4]) -> [u8; 32] {
    let mut key = [0u8; 32];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    key
}

fn sample<R: Rng>(kind: &EnsembleKind, rng: &mut R) -> Matrix {
    match kind {
        EnsembleKind::TwoPoint { a, b } => {
            if rng.random::<bool>() {
                a.clone()
            } else {
                b.clone()
            }
        }
        EnsembleKind::SignPerturbation { center, direction } => {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let mut m = center.clone();
            m.axpy(sign, direction).expect("validated shapes");
            m
        }
        EnsembleKind::RankOneSphere { d, radius } => {
            let v = unit_vector(*d, rng);
            let r2 = radius * radius;
            let mut m = Matrix::zeros(*d, *d);
            for i in 0..*d {
                for j in 0..*d {
                    m.set(i, j, r2 * v[i] * v[j]);
                }
            }
            m
        }
        EnsembleKind::ScalarUniform { low, high } => {
            let u: f64 = rng.random();
            Matrix::scalar(low + (high - low) * u)
        }
    }
}

fn unit_vector<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// One complete outcome sequence of a finite-support ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub probability: f64,
    /// `matrices[j]` is `X_{j+1}`.
    pub matrices: Vec<Matrix>,
}

/// Every length-`n` outcome sequence with its exact probability.
pub fn enumerate_outcomes(spec: &EnsembleSpec, n: usize) -> Result<Vec<Outcome>> {
    let (a, b) = match &spec.kind {
        EnsembleKind::TwoPoint { a, b } => (a, b),
        other => return Err(Error::InfiniteSupport(other.name())),
    };
    if n >= 64 || (1usize << n) > MAX_OUTCOMES {
        return Err(Error::EnumerationTooLarge { support: 2, n });
    }
    let probability = 0.5f64.powi(n as i32);
    Ok((0..1usize << n)
        .map(|mask| Outcome {
            probability,
            matrices: (0..n)
                .map(|j| {
                    if mask >> j & 1 == 0 {
                        a.clone()
                    } else {
                        b.clone()
                    }
                })
                .collect(),
        })
        .collect())
}
