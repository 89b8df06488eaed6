use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// `exp(−|x − y| / ℓ)`.
pub fn exp_kernel(x: f64, y: f64, ell: f64) -> f64 {
    (-(x - y).abs() / ell).exp()
}

/// Truncated Karhunen–Loève expansion of a zero-mean Gaussian field with
/// covariance `σ² exp(−|x − y|/ℓ)` on an interval, discretized by Nyström's
/// method on Gauss–Legendre nodes.
#[derive(Debug, Clone)]
pub struct KLExpansion {
    pub domain: (f64, f64),
    pub ell: f64,
    pub sigma: f64,
    pub nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
    /// Eigenvalues `α_k`, nonincreasing.
    pub eigvals: Vec<f64>,
    /// `φ_k(x_j)`: row `j` is node `x_j`, column `k` is mode `k`.
    pub eigfuncs: DMatrix<f64>,
}

/// Eigenpairs of the covariance operator from the symmetric weighted form
/// `W^{1/2} C W^{1/2}`; `φ_k(x_j) = y_jk / √w_j`.
pub fn nystrom_kl(domain: (f64, f64), ell: f64, sigma: f64, n_gp: usize, n_terms: usize) -> Result<KLExpansion> {
    let (a, b) = domain;
    if !(b > a) || !(ell > 0.0) || !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("invalid KL setup: domain {domain:?}, ell {ell}, sigma {sigma}")));
    }
    if n_gp < 2 || n_terms == 0 || n_terms > n_gp {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= K <= n_gp and n_gp >= 2, got K = {n_terms}, n_gp = {n_gp}"
        )));
    }
    let (nodes, weights) = gauss_legendre(n_gp, a, b);
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let var = sigma * sigma;
    let m = DMatrix::from_fn(n_gp, n_gp, |i, j| sqrt_w[i] * var * exp_kernel(nodes[i], nodes[j], ell) * sqrt_w[j]);
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n_gp).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));

    let mut eigvals = Vec::with_capacity(n_terms);
    let mut eigfuncs = DMatrix::zeros(n_gp, n_terms);
    for (k, &idx) in order.iter().take(n_terms).enumerate() {
        let alpha = eig.eigenvalues[idx];
        if !(alpha > 0.0) {
            return Err(Error::EigenFailure);
        }
        eigvals.push(alpha);
        let y = eig.eigenvectors.column(idx);
        let pivot = y.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n_gp {
            eigfuncs[(j, k)] = sign * y[j] / sqrt_w[j];
        }
    }
    Ok(KLExpansion { domain, ell, sigma, nodes, quad_weights: weights, eigvals, eigfuncs })
}

impl KLExpansion {
    pub fn n_terms(&self) -> usize {
        self.eigvals.len()
    }

    /// Nyström interpolation `φ_k(x) = (1/α_k) Σ_j w_j σ² k(x, x_j) φ_k(x_j)`.
    pub fn eigfuncs_at(&self, x: f64) -> Vec<f64> {
        let var = self.sigma * self.sigma;
        let kernel: Vec<f64> =
            self.nodes.iter().zip(&self.quad_weights).map(|(xj, wj)| wj * var * exp_kernel(x, *xj, self.ell)).collect();
        (0..self.n_terms())
            .map(|k| {
                let col = self.eigfuncs.column(k);
                kernel.iter().zip(col.iter()).map(|(a, b)| a * b).sum::<f64>() / self.eigvals[k]
            })
            .collect()
    }

    /// `Σ_{k<K} α_k / (σ² |D|)`; the denominator is the trace of the operator.
    pub fn captured_variance_ratio(&self, n_terms: usize) -> f64 {
        let len = self.domain.1 - self.domain.0;
        self.eigvals.iter().take(n_terms).sum::<f64>() / (self.sigma * self.sigma * len)
    }
}

/// Lognormal field `exp(μ_g + Σ_k √α_k φ_k(x) θ_k)` with moments matched
/// to a target mean and standard deviation.
#[derive(Debug, Clone)]
pub struct LognormalField {
    pub kl: KLExpansion,
    pub mu_lognormal: f64,
    pub sigma_lognormal: f64,
    pub mu_gauss: f64,
    pub sigma_gauss: f64,
}

impl LognormalField {
    pub fn new(domain: (f64, f64), ell: f64, mu: f64, sigma: f64, n_gp: usize, n_terms: usize) -> Result<Self> {
        if !(mu > 0.0) || !(sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("lognormal moments must be positive, got {mu}, {sigma}")));
        }
        let (mu_gauss, sigma_gauss) = lognormal_to_gaussian(mu, sigma);
        let kl = nystrom_kl(domain, ell, sigma_gauss, n_gp, n_terms)?;
        Ok(Self { kl, mu_lognormal: mu, sigma_lognormal: sigma, mu_gauss, sigma_gauss })
    }

    pub fn n_terms(&self) -> usize {
        self.kl.n_terms()
    }

    /// Field value at an arbitrary point.
    pub fn value_at(&self, x: f64, theta: &[f64]) -> f64 {
        let phi = self.kl.eigfuncs_at(x);
        let s: f64 = phi.iter().zip(&self.kl.eigvals).zip(theta).map(|((p, a), t)| a.sqrt() * p * t).sum();
        (self.mu_gauss + s).exp()
    }
}

/// `(μ_g, σ_g)` of the Gaussian whose exponential has mean `mu` and
/// standard deviation `sigma`.
pub fn lognormal_to_gaussian(mu: f64, sigma: f64) -> (f64, f64) {
    let var_g = (1.0 + (sigma / mu).powi(2)).ln();
    let mu_g = (mu * mu / (mu * mu + sigma * sigma).sqrt()).ln();
    (mu_g, var_g.sqrt())
}

/// Field values at the quadrature nodes.
pub fn realize_lognormal_field(field: &LognormalField, theta_kl: &[f64]) -> Result<Vec<f64>> {
    let k = field.n_terms();
    if theta_kl.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: theta_kl.len() });
    }
    let kl = &field.kl;
    Ok((0..kl.nodes.len())
        .map(|j| {
            let s: f64 = (0..k).map(|m| kl.eigvals[m].sqrt() * kl.eigfuncs[(j, m)] * theta_kl[m]).sum();
            (field.mu_gauss + s).exp()
        })
        .collect())
}
