//! Rare-event probability estimation by importance sampling.
//!
//! The crate provides plain Monte Carlo, the cross-entropy (CE) method, the
//! improved cross-entropy (iCE) method with smooth failure indicators, and
//! iCEred: iCE restricted to a failure-informed subspace (FIS) estimated from
//! gradients of the log-smooth indicator, followed by an optional refinement
//! stage that adds LSF-only samples from the final biasing density.
//!
//! All inputs are assumed to live in independent standard Gaussian space.
//! Sample matrices are stored column-wise: a `d × n` matrix holds `n`
//! samples of dimension `d`.

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod densities;
pub mod error;
pub mod estimators;
pub mod fis;
pub mod indicators;
pub mod problems;
pub mod quadrature;
pub mod randfield;
pub mod special;

pub use densities::{CompositeBiasing, GaussianFactor, GaussianParams};
pub use error::{Error, Result};
pub use estimators::{run_ce, run_ice, run_icered, run_mc, EstimationResult, LevelDiag, LimitState, SolverConfig};
pub use fis::FisBasis;
pub use indicators::SmoothIndicatorKind;

/// Seeded generator used by the CLI and the test suites.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the crate's standard seeded generator.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
