//! Axial bar clamped at `x = 0` with a random tip load and a lognormal
//! Young's modulus field. The QoI is the tip displacement and failure means
//! it exceeds `u_max`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::LimitState;

use super::kl::LognormalField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarConfig {
    pub length: f64,
    pub area: f64,
    pub n_elem: usize,
    /// Number of KL terms `K`; the stochastic dimension is `K + 1`.
    pub n_kl: usize,
    /// Correlation length of the log-field.
    pub ell: f64,
    /// Gauss–Legendre nodes for the Nyström discretization.
    pub n_gp: usize,
    pub mu_e: f64,
    pub sigma_e: f64,
    pub load_mean: f64,
    /// `σ_q / μ_q`.
    pub load_cov: f64,
    /// `u_max` as a multiple of the nominal tip displacement
    /// `μ_q L / (exp(μ_g) A)`.
    pub u_max_factor: f64,
}

impl Default for BarConfig {
    fn default() -> Self {
        Self {
            length: 1.0,
            area: 1e-4,
            n_elem: 100,
            n_kl: 50,
            ell: 0.1,
            n_gp: 200,
            mu_e: 2e5,
            sigma_e: 3e4,
            load_mean: 0.01,
            load_cov: 0.2,
            u_max_factor: 1.71,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarProblem {
    pub config: BarConfig,
    pub field: LognormalField,
    pub load_std: f64,
    pub u_max: f64,
    /// `√α_k φ_k(x_e)` at element midpoints, `n_elem × K`.
    modes_mid: DMatrix<f64>,
}

/// Element stiffnesses and displacements of the free nodes `1..=n`.
#[derive(Debug, Clone)]
pub struct BarSolution {
    pub stiffness: Vec<f64>,
    pub u: Vec<f64>,
}

impl BarProblem {
    pub fn new(config: BarConfig) -> Result<Self> {
        if config.n_elem == 0 || !(config.length > 0.0) || !(config.area > 0.0) {
            return Err(Error::InvalidConfig("bar needs positive length, area and element count".into()));
        }
        let field = LognormalField::new(
            (0.0, config.length),
            config.ell,
            config.mu_e,
            config.sigma_e,
            config.n_gp,
            config.n_kl,
        )?;
        let h = config.length / config.n_elem as f64;
        let k = field.n_terms();
        let mut modes_mid = DMatrix::zeros(config.n_elem, k);
        for e in 0..config.n_elem {
            let phi = field.kl.eigfuncs_at((e as f64 + 0.5) * h);
            for m in 0..k {
                modes_mid[(e, m)] = field.kl.eigvals[m].sqrt() * phi[m];
            }
        }
        let nominal = config.load_mean * config.length / (field.mu_gauss.exp() * config.area);
        let u_max = config.u_max_factor * nominal;
        let load_std = config.load_cov * config.load_mean;
        Ok(Self { config, field, load_std, u_max, modes_mid })
    }

    pub fn n_kl(&self) -> usize {
        self.field.n_terms()
    }

    /// Element Young's moduli at the midpoints.
    pub fn element_moduli(&self, theta_kl: &[f64]) -> Vec<f64> {
        let mu = self.field.mu_gauss;
        (0..self.config.n_elem)
            .map(|e| {
                let s: f64 = self.modes_mid.row(e).iter().zip(theta_kl).map(|(a, t)| a * t).sum();
                (mu + s).exp()
            })
            .collect()
    }

    pub fn load(&self, theta_q: f64) -> f64 {
        self.config.load_mean + self.load_std * theta_q
    }

    /// Assembles and solves `K u = f` for the free nodes.
    pub fn solve(&self, theta: &[f64]) -> Result<BarSolution> {
        let n = self.config.n_elem;
        if theta.len() != self.n_kl() + 1 {
            return Err(Error::DimensionMismatch { expected: self.n_kl() + 1, got: theta.len() });
        }
        let h = self.config.length / n as f64;
        let stiffness: Vec<f64> = self.element_moduli(&theta[1..]).iter().map(|e| e * self.config.area / h).collect();
        let mut rhs = vec![0.0; n];
        rhs[n - 1] = self.load(theta[0]);
        let u = solve_bar_system(&stiffness, &rhs)?;
        Ok(BarSolution { stiffness, u })
    }
}

/// Solves the tridiagonal system of a chain of springs `k_1..k_n` clamped at
/// node 0: `diag_i = k_i + k_{i+1}`, `diag_n = k_n`, `off_i = −k_{i+1}`.
fn solve_bar_system(k: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = k.len();
    if k.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::SolveFailure("non-positive element stiffness".into()));
    }
    let diag = |i: usize| if i + 1 < n { k[i] + k[i + 1] } else { k[i] };
    let off = |i: usize| -k[i + 1];
    // Thomas algorithm
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut b = diag(0);
    if n > 1 {
        c[0] = off(0) / b;
    }
    d[0] = rhs[0] / b;
    for i in 1..n {
        let a = off(i - 1);
        b = diag(i) - a * c[i - 1];
        if !(b.abs() > 0.0) {
            return Err(Error::SolveFailure("zero pivot".into()));
        }
        if i + 1 < n {
            c[i] = off(i) / b;
        }
        d[i] = (rhs[i] - a * d[i - 1]) / b;
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// `g = u_max − u(L)` and its gradient by the adjoint method.
///
/// With `K λ = e_n`: `∂g/∂θ_q = −λ_n σ_q` and
/// `∂g/∂θ_k = λᵀ (∂K/∂θ_k) u = Σ_e k_e a_ek (λ_e − λ_{e−1})(u_e − u_{e−1})`,
/// where `a_ek = √α_k φ_k(x_e)` and node 0 is fixed.
pub fn bar_lsf(theta: &[f64], problem: &BarProblem) -> Result<(f64, Vec<f64>)> {
    let sol = problem.solve(theta)?;
    let n = problem.config.n_elem;
    let g = problem.u_max - sol.u[n - 1];

    let mut unit = vec![0.0; n];
    unit[n - 1] = 1.0;
    let lambda = solve_bar_system(&sol.stiffness, &unit)?;

    let kk = problem.n_kl();
    let mut grad = vec![0.0; kk + 1];
    grad[0] = -lambda[n - 1] * problem.load_std;
    for e in 0..n {
        let (u_prev, l_prev) = if e == 0 { (0.0, 0.0) } else { (sol.u[e - 1], lambda[e - 1]) };
        let coef = sol.stiffness[e] * (lambda[e] - l_prev) * (sol.u[e] - u_prev);
        for (m, a) in problem.modes_mid.row(e).iter().enumerate() {
            grad[m + 1] += coef * a;
        }
    }
    Ok((g, grad))
}

impl LimitState for BarProblem {
    fn dim(&self) -> usize {
        self.n_kl() + 1
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let n = self.config.n_elem;
        self.solve(theta).map(|s| self.u_max - s.u[n - 1]).unwrap_or(f64::NAN)
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        bar_lsf(theta, self).ok().map(|r| r.1)
    }
}
