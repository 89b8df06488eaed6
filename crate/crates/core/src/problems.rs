//! Analytic benchmark limit-state functions with reference probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::LimitState;
use crate::quadrature::integrate_adaptive;
use crate::special::{normal_cdf, normal_pdf};

/// `g(θ) = β − (1/√d) Σ θ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearLsf {
    pub dim: usize,
    pub beta: f64,
}

/// `g(θ) = β + (κ/4)(θ₁ − θ₂)² − (1/√d) Σ θ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticLsf {
    pub dim: usize,
    pub beta: f64,
    pub kappa: f64,
}

/// Constant `g`, useful for checking degenerate cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantLsf {
    pub dim: usize,
    pub value: f64,
}

fn check_dim(theta: &[f64], d: usize) -> Result<()> {
    if theta.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: theta.len() });
    }
    Ok(())
}

pub fn linear_lsf(theta: &[f64], problem: &LinearLsf) -> Result<(f64, Vec<f64>)> {
    check_dim(theta, problem.dim)?;
    let c = 1.0 / (problem.dim as f64).sqrt();
    let g = problem.beta - c * theta.iter().sum::<f64>();
    Ok((g, vec![-c; problem.dim]))
}

pub fn quadratic_lsf(theta: &[f64], problem: &QuadraticLsf) -> Result<(f64, Vec<f64>)> {
    check_dim(theta, problem.dim)?;
    if problem.dim < 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: problem.dim });
    }
    let c = 1.0 / (problem.dim as f64).sqrt();
    let diff = theta[0] - theta[1];
    let g = problem.beta + 0.25 * problem.kappa * diff * diff - c * theta.iter().sum::<f64>();
    let mut grad = vec![-c; problem.dim];
    grad[0] += 0.5 * problem.kappa * diff;
    grad[1] -= 0.5 * problem.kappa * diff;
    Ok((g, grad))
}

/// `Φ(−β)`.
pub fn linear_reference(beta: f64) -> f64 {
    normal_cdf(-beta)
}

/// Failure probability of the quadratic LSF, independent of `d`.
///
/// With `v = (θ₁ − θ₂)/√2` and `u = Σθ_i/√d`, which are independent
/// standard normals, failure means `u ≥ β + (κ/2)v²`. Hence
/// `p = ∫ φ(v) Φ(−β − κv²/2) dv`, integrated adaptively.
pub fn quadratic_reference(beta: f64, kappa: f64) -> Result<f64> {
    if !(kappa >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "quadratic reference needs finite beta and kappa >= 0, got {beta}, {kappa}"
        )));
    }
    if kappa == 0.0 {
        return Ok(linear_reference(beta));
    }
    let f = |v: f64| normal_pdf(v) * normal_cdf(-beta - 0.5 * kappa * v * v);
    // φ(v) < 1e-40 beyond |v| = 13.5; the integrand is even.
    Ok(2.0 * integrate_adaptive(f, 0.0, 13.5, 1e-12 / 2.0)?)
}

impl LimitState for LinearLsf {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64]) -> f64 {
        linear_lsf(theta, self).map(|r| r.0).unwrap_or(f64::NAN)
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        linear_lsf(theta, self).ok().map(|r| r.1)
    }

    fn reference_probability(&self) -> Option<f64> {
        Some(linear_reference(self.beta))
    }
}

impl LimitState for QuadraticLsf {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64]) -> f64 {
        quadratic_lsf(theta, self).map(|r| r.0).unwrap_or(f64::NAN)
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        quadratic_lsf(theta, self).ok().map(|r| r.1)
    }

    fn reference_probability(&self) -> Option<f64> {
        quadratic_reference(self.beta, self.kappa).ok()
    }
}

impl LimitState for ConstantLsf {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _theta: &[f64]) -> f64 {
        self.value
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn gradient(&self, _theta: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim])
    }

    fn reference_probability(&self) -> Option<f64> {
        Some(if self.value <= 0.0 { 1.0 } else { 0.0 })
    }
}
