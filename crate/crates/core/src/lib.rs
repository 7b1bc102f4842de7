//! Normalized random matrix products `Z_n = (I + X_n/n) ··· (I + X_1/n)`.
//!
//! The crate computes `Z_n` and its degree-k expansion terms exactly,
//! evaluates the closed-form concentration bounds on `‖Z_n - e^X‖`, builds
//! the parallel-class partitions that group the expansion into independent
//! sums, and runs seeded Monte Carlo experiments comparing realized errors
//! against those bounds.
//!
//! Module map:
//!
//! - [`linalg`]: dense matrices, spectral norm, matrix power and exponential
//! - [`ensembles`]: bounded random-matrix sources with known mean and bound
//! - [`products`]: `Z_n`, the terms `Z_{n,k}`, and their expectations
//! - [`bounds`]: every closed-form bound and admissibility condition
//! - [`baranyai`]: parallel classes of k-subsets and the grouped sums
//! - [`montecarlo`]: error trials, tail frequencies, rate fits
//! - [`config`] / [`report`]: configuration parsing and output schemas

pub mod baranyai;
pub mod bounds;
pub mod config;
pub mod ensembles;
pub mod error;
mod flow;
pub mod linalg;
pub mod montecarlo;
pub mod products;
pub mod report;
pub mod stats;

pub use baranyai::{build_partitions, grouped_sums, verify_family, PartitionFamily};
pub use bounds::BoundReport;
pub use ensembles::{ensemble_bound, ensemble_mean, EnsembleKind, EnsembleSpec, SampleStream};
pub use error::{Error, Result};
pub use linalg::{expm, mat_mul, mat_pow, spectral_norm, Matrix};
pub use montecarlo::{run_error_trials, ExperimentConfig, RateFit, TrialRecord};
pub use products::{elementary_terms, expected_zn, expected_znk, z_product, ProductDecomposition};
