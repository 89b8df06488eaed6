//! Estimation drivers: plain Monte Carlo, CE, iCE, iCEred and the
//! refinement stage, plus the shared statistics they rely on.

mod ce;
mod ice;
mod icered;
mod mc;
mod refine;
mod smoothing;
mod stats;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::SmoothIndicatorKind;

pub use ce::run_ce;
pub use ice::run_ice;
pub use icered::{run_icered, run_icered_traced, IceredTrace, LevelSpectrum};
pub use mc::run_mc;
pub use refine::{refine, RefineState};
pub use smoothing::{adapt_smoothing, adapt_smoothing_ln, SmoothingUpdate};
pub use stats::{is_estimate, stopping_cv, weighted_cv, StoppingCv};

/// A limit-state function `g` on standard Gaussian space; failure is `g ≤ 0`.
pub trait LimitState: Sync {
    fn dim(&self) -> usize;

    fn value(&self, theta: &[f64]) -> f64;

    fn has_gradient(&self) -> bool {
        false
    }

    fn gradient(&self, _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn reference_probability(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Samples per level `N`.
    pub n_per_level: usize,
    /// Target cv of the smoothed weights, and the stopping threshold for
    /// `cv(𝟙/f)`.
    pub delta: f64,
    /// FIS truncation tolerance.
    pub eps: f64,
    /// Target cv of the refined estimate.
    pub delta_bar: f64,
    /// Refinement checks the running mean of the cv every `m_check` rounds.
    pub m_check: usize,
    /// Samples added per refinement round.
    pub m_increment: usize,
    pub t_max: usize,
    /// CE elite fraction.
    pub rho: f64,
    pub kind: SmoothIndicatorKind,
    pub seed: u64,
    pub refine: bool,
    /// Gradients per level, taken from the first `n_grad` samples.
    /// `None` means all `N`.
    pub n_grad: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_per_level: 1000,
            delta: 1.5,
            eps: 0.01,
            delta_bar: 0.05,
            m_check: 10,
            m_increment: 50,
            t_max: 50,
            rho: 0.1,
            kind: SmoothIndicatorKind::Logistic,
            seed: 0,
            refine: false,
            n_grad: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_per_level < 2 {
            return bad("n_per_level must be at least 2");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        if !(self.delta > 0.0) {
            return bad("delta must be positive");
        }
        if !(self.eps >= 0.0) {
            return bad("eps must be non-negative");
        }
        if !(self.delta_bar > 0.0) {
            return bad("delta_bar must be positive");
        }
        if self.t_max < 1 {
            return bad("t_max must be at least 1");
        }
        if self.m_check < 1 || self.m_increment < 1 {
            return bad("m_check and m_increment must be at least 1");
        }
        if let Some(n) = self.n_grad {
            if n < 1 || n > self.n_per_level {
                return bad("n_grad must lie in 1..=n_per_level");
            }
        }
        Ok(())
    }

    pub fn n_grad(&self) -> usize {
        self.n_grad.unwrap_or(self.n_per_level)
    }
}

/// Diagnostics of one sampling level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelDiag {
    pub level: usize,
    /// Smoothing used for the stopping check at this level (`∞` at level 0).
    pub s: f64,
    /// Smoothing chosen for the next level, if the run continued.
    pub s_next: Option<f64>,
    /// `cv(𝟙/f)` at this level (smooth-indicator methods).
    pub stop_cv: Option<f64>,
    /// CE threshold.
    pub gamma: Option<f64>,
    /// FIS rank built from this level's samples.
    pub rank: Option<usize>,
    /// cv of the weights used to fit the next biasing density.
    pub weights_cv: Option<f64>,
    /// Samples dropped from `cv(𝟙/f)` because `f` underflowed.
    pub excluded: usize,
    pub smoothing_degenerate: bool,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub p_hat: f64,
    pub cv_hat: f64,
    pub n_levels: usize,
    pub lsf_calls: usize,
    pub grad_calls: usize,
    pub converged: bool,
    pub per_level: Vec<LevelDiag>,
    /// cv of the estimate before refinement, when refinement ran.
    pub cv_before_refine: Option<f64>,
    /// Failure reason when `converged` is false.
    pub note: Option<String>,
}

impl EstimationResult {
    fn failed(n_levels: usize, lsf_calls: usize, grad_calls: usize, per_level: Vec<LevelDiag>, err: &Error) -> Self {
        Self {
            p_hat: 0.0,
            cv_hat: f64::INFINITY,
            n_levels,
            lsf_calls,
            grad_calls,
            converged: false,
            per_level,
            cv_before_refine: None,
            note: Some(err.to_string()),
        }
    }
}

/// Evaluates `g` at every column of `theta` in parallel.
pub fn evaluate_batch<P: LimitState + ?Sized>(problem: &P, theta: &DMatrix<f64>) -> Result<Vec<f64>> {
    let d = theta.nrows();
    if d != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: d });
    }
    let g: Vec<f64> = theta.as_slice().par_chunks(d).map(|x| problem.value(x)).collect();
    if let Some(bad) = g.iter().find(|v| v.is_nan()) {
        return Err(Error::InvalidLsfValue(*bad));
    }
    Ok(g)
}

/// Gradients of `g` at the first `n` columns of `theta`, as a `d × n` matrix.
pub fn gradient_batch<P: LimitState + ?Sized>(problem: &P, theta: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    let d = theta.nrows();
    let grads: Vec<Option<Vec<f64>>> = theta.as_slice()[..d * n].par_chunks(d).map(|x| problem.gradient(x)).collect();
    let mut out = DMatrix::zeros(d, n);
    for (j, g) in grads.into_iter().enumerate() {
        let g = g.ok_or(Error::MissingGradient)?;
        if g.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: g.len() });
        }
        out.set_column(j, &nalgebra::DVector::from_vec(g));
    }
    Ok(out)
}

/// `exp(ln w − max ln w)`, for consumers that only need relative weights.
pub(crate) fn relative_weights(ln_w: &[f64]) -> Vec<f64> {
    let max = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return vec![0.0; ln_w.len()];
    }
    ln_w.iter().map(|v| (v - max).exp()).collect()
}
