//! Gaussian densities: evaluation, sampling, weighted fitting, and the
//! composite reduced-space biasing density.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fis::FisBasis;
use crate::special::LN_2PI;

/// Mean and covariance of a multivariate Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let k = mean.len();
        if cov.nrows() != k || cov.ncols() != k {
            return Err(Error::DimensionMismatch { expected: k, got: cov.nrows().max(cov.ncols()) });
        }
        if cov.iter().chain(mean.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        let scale = cov.amax();
        if (&cov - cov.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidCovariance("not symmetric".into()));
        }
        Ok(Self { mean, cov })
    }

    /// `N(0, I_k)`.
    pub fn standard(k: usize) -> Self {
        Self { mean: DVector::zeros(k), cov: DMatrix::identity(k, k) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn factor(&self) -> Result<GaussianFactor> {
        GaussianFactor::new(self)
    }
}

/// Cholesky-factored Gaussian, ready for repeated evaluation and sampling.
///
/// The covariance is factorized as given. If that fails, a diagonal jitter of
/// `1e-10 · trace/k` (at least `1e-300`) is added, then `1e-6 · trace/k`.
#[derive(Debug, Clone)]
pub struct GaussianFactor {
    mean: DVector<f64>,
    chol_l: DMatrix<f64>,
    log_det: f64,
    jitter: f64,
}

impl GaussianFactor {
    pub fn new(params: &GaussianParams) -> Result<Self> {
        let k = params.dim();
        let avg_diag = params.cov.trace() / k.max(1) as f64;
        let mut chol = Cholesky::new(params.cov.clone());
        let mut jitter = 0.0;
        for rel in [1e-10, 1e-6] {
            if chol.is_some() {
                break;
            }
            jitter = (rel * avg_diag).max(1e-300);
            let mut cov = params.cov.clone();
            for i in 0..k {
                cov[(i, i)] += jitter;
            }
            chol = Cholesky::new(cov);
        }
        let chol_l = chol.ok_or(Error::DegenerateCovariance)?.unpack();
        let log_det = 2.0 * chol_l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() && k > 0 {
            return Err(Error::DegenerateCovariance);
        }
        Ok(Self { mean: params.mean.clone(), chol_l, log_det, jitter })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Lower Cholesky factor of the (possibly jittered) covariance.
    pub fn chol_l(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Diagonal jitter that was needed to factorize, zero if none.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn logpdf(&self, x: &[f64]) -> Result<f64> {
        let x = DMatrix::from_column_slice(x.len(), 1, x);
        Ok(self.logpdf_columns(&x)?[0])
    }

    /// Log-density of every column of `x`.
    pub fn logpdf_columns(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let k = self.dim();
        if x.nrows() != k {
            return Err(Error::DimensionMismatch { expected: k, got: x.nrows() });
        }
        let mut z = x.clone();
        for mut col in z.column_iter_mut() {
            col -= &self.mean;
        }
        self.chol_l.solve_lower_triangular_mut(&mut z);
        let base = -0.5 * (k as f64 * LN_2PI + self.log_det);
        Ok(z.column_iter().map(|c| base - 0.5 * c.norm_squared()).collect())
    }

    /// `n` draws as the columns of a `k × n` matrix.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let z = standard_normal_matrix(self.dim(), n, rng);
        let mut x = &self.chol_l * z;
        for mut col in x.column_iter_mut() {
            col += &self.mean;
        }
        x
    }
}

/// `rows × cols` i.i.d. standard normals, filled column by column.
pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_vec(rows, cols, data)
}

pub fn gaussian_logpdf(x: &[f64], params: &GaussianParams) -> Result<f64> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), got: x.len() });
    }
    params.factor()?.logpdf(x)
}

pub fn sample_gaussian<R: Rng + ?Sized>(params: &GaussianParams, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    Ok(params.factor()?.sample(n, rng))
}

/// `ln N(x; 0, I)` for every column of `x`.
pub fn standard_normal_logpdf_columns(x: &DMatrix<f64>) -> Vec<f64> {
    let base = -0.5 * x.nrows() as f64 * LN_2PI;
    x.column_iter().map(|c| base - 0.5 * c.norm_squared()).collect()
}

/// Weighted maximum-likelihood Gaussian for the columns of `samples`:
/// `μ = Σ w_i x_i / Σ w`, `Σ = Σ w_i (x_i − μ)(x_i − μ)ᵀ / Σ w`.
///
/// The returned covariance is the exact (un-jittered) estimate; it is
/// checked to be factorizable with at most the standard jitter.
pub fn fit_gaussian_weighted(samples: &DMatrix<f64>, weights: &[f64]) -> Result<GaussianParams> {
    fit_gaussian_weighted_factored(samples, weights).map(|(p, _)| p)
}

/// [`fit_gaussian_weighted`] together with the factor computed by its check.
pub fn fit_gaussian_weighted_factored(
    samples: &DMatrix<f64>,
    weights: &[f64],
) -> Result<(GaussianParams, GaussianFactor)> {
    let (k, n) = samples.shape();
    if weights.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidConfig(format!("invalid weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllWeightsZero);
    }
    let w: Vec<f64> = weights.iter().map(|w| w / total).collect();

    let mut mean = DVector::zeros(k);
    for (col, wi) in samples.column_iter().zip(&w) {
        if *wi > 0.0 {
            mean.axpy(*wi, &col, 1.0);
        }
    }
    let mut centered = samples.clone();
    for (mut col, wi) in centered.column_iter_mut().zip(&w) {
        col -= &mean;
        col *= wi.sqrt();
    }
    let cov = &centered * centered.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    let params = GaussianParams { mean, cov };
    let factor = params.factor()?;
    Ok((params, factor))
}

/// Biasing density on local coordinates `θ̃ = [θ̃_r, θ̃_⊥]`: a general Gaussian
/// on the FIS times the standard Gaussian on the complement.
#[derive(Debug, Clone)]
pub struct CompositeBiasing {
    reduced: GaussianParams,
    factor: GaussianFactor,
    basis: FisBasis,
}

impl CompositeBiasing {
    pub fn new(reduced: GaussianParams, basis: FisBasis) -> Result<Self> {
        if reduced.dim() != basis.rank() {
            return Err(Error::DimensionMismatch { expected: basis.rank(), got: reduced.dim() });
        }
        let factor = reduced.factor()?;
        Ok(Self { reduced, factor, basis })
    }

    pub fn reduced(&self) -> &GaussianParams {
        &self.reduced
    }

    pub fn reduced_factor(&self) -> &GaussianFactor {
        &self.factor
    }

    pub fn basis(&self) -> &FisBasis {
        &self.basis
    }

    pub fn full_dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    /// `ln π_r(θ̃_r) + ln N(θ̃_⊥; 0, I)` for local coordinates `θ̃`.
    pub fn composite_logpdf(&self, theta_tilde: &[f64]) -> Result<f64> {
        let d = self.full_dim();
        let r = self.rank();
        if theta_tilde.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: theta_tilde.len() });
        }
        let reduced = self.factor.logpdf(&theta_tilde[..r])?;
        let perp = &theta_tilde[r..];
        let perp_ln = -0.5 * (perp.len() as f64 * LN_2PI + perp.iter().map(|v| v * v).sum::<f64>());
        Ok(reduced + perp_ln)
    }

    /// Log-density at global points (columns of `theta`). The basis change is
    /// orthogonal, so no Jacobian term appears.
    pub fn logpdf_global(&self, theta: &DMatrix<f64>) -> Result<Vec<f64>> {
        let (tr, tp) = crate::fis::project(theta, &self.basis)?;
        let reduced = self.factor.logpdf_columns(&tr)?;
        let perp = standard_normal_logpdf_columns(&tp);
        Ok(reduced.iter().zip(&perp).map(|(a, b)| a + b).collect())
    }

    /// `ln π_pr(θ) − ln π_bias(θ)` from the FIS coordinates alone; the
    /// complement factors cancel.
    pub fn ln_prior_ratio(&self, theta_r: &DMatrix<f64>) -> Result<Vec<f64>> {
        let num = standard_normal_logpdf_columns(theta_r);
        let den = self.factor.logpdf_columns(theta_r)?;
        Ok(num.iter().zip(&den).map(|(a, b)| a - b).collect())
    }

    /// Draws `n` global samples. Returns `(θ, θ̃_r)`.
    ///
    /// The FIS coordinates are drawn first, then a full standard normal block
    /// `z`; the complement part is `P_⊥ z = Φ_⊥(Φ_⊥ᵀ z)` with
    /// `Φ_⊥ᵀ z ~ N(0, I_{d−r})`, computed as `z − Φ_r Φ_rᵀ z`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (DMatrix<f64>, DMatrix<f64>) {
        let theta_r = self.factor.sample(n, rng);
        let z = standard_normal_matrix(self.full_dim(), n, rng);
        let phi_r = self.basis.phi_r();
        let coeff = phi_r.tr_mul(&z) - &theta_r;
        let theta = z - phi_r * coeff;
        (theta, theta_r)
    }
}

/// Reference parameters of the previous level written in the coordinates of
/// a new basis, kept in structured form.
///
/// With `Ψ = Φ_newᵀ Φ_r,old` (orthonormal columns) the density in new
/// coordinates is `N(Ψμ_r, I + Ψ(Σ_r − I)Ψᵀ)`, whose inverse is
/// `I − ΨΨᵀ + ΨΣ_r⁻¹Ψᵀ` and whose determinant is `det Σ_r`.
#[derive(Debug, Clone)]
pub struct AdjustedReference {
    psi: DMatrix<f64>,
    reduced: GaussianFactor,
}

impl AdjustedReference {
    pub fn new(old: &CompositeBiasing, basis_new: &FisBasis) -> Result<Self> {
        if basis_new.dim() != old.full_dim() {
            return Err(Error::DimensionMismatch { expected: old.full_dim(), got: basis_new.dim() });
        }
        let psi = basis_new.vectors().tr_mul(&old.basis().phi_r());
        Ok(Self { psi, reduced: old.reduced_factor().clone() })
    }

    pub fn dim(&self) -> usize {
        self.psi.nrows()
    }

    /// Dense mean and covariance in the new coordinates.
    pub fn params(&self) -> GaussianParams {
        let d = self.dim();
        let r = self.psi.ncols();
        let mean = &self.psi * self.reduced.mean();
        let l = self.reduced.chol_l();
        let sigma_r = l * l.transpose() - DMatrix::<f64>::identity(r, r);
        let cov = DMatrix::<f64>::identity(d, d) + &self.psi * sigma_r * self.psi.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        GaussianParams { mean, cov }
    }

    /// Log-density at local coordinates (columns of `theta_tilde`).
    pub fn logpdf_columns(&self, theta_tilde: &DMatrix<f64>) -> Result<Vec<f64>> {
        let d = self.dim();
        if theta_tilde.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, got: theta_tilde.nrows() });
        }
        let along = self.psi.tr_mul(theta_tilde);
        let reduced = self.reduced.logpdf_columns(&along)?;
        let r = along.nrows() as f64;
        Ok(theta_tilde
            .column_iter()
            .zip(along.column_iter())
            .zip(&reduced)
            .map(|((full, a), lr)| {
                let perp_sq = (full.norm_squared() - a.norm_squared()).max(0.0);
                lr - 0.5 * ((d as f64 - r) * LN_2PI + perp_sq)
            })
            .collect())
    }

    /// `ln π_pr − ln π_adj` at local coordinates; only the component along
    /// the old FIS contributes.
    pub fn ln_prior_ratio(&self, theta_tilde: &DMatrix<f64>) -> Result<Vec<f64>> {
        let d = self.dim();
        if theta_tilde.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, got: theta_tilde.nrows() });
        }
        let along = self.psi.tr_mul(theta_tilde);
        let num = standard_normal_logpdf_columns(&along);
        let den = self.reduced.logpdf_columns(&along)?;
        Ok(num.iter().zip(&den).map(|(a, b)| a - b).collect())
    }
}

/// Full-dimensional reference parameters in the coordinates of `basis_new`,
/// assembled blockwise from `Σ₁ = Φ_r Σ_r Φ_rᵀ` and `Σ₂ = Φ_⊥ Φ_⊥ᵀ` of the old
/// basis.
pub fn adjust_reference_params(
    reduced: &GaussianParams,
    basis_old: &FisBasis,
    basis_new: &FisBasis,
) -> Result<GaussianParams> {
    let d = basis_old.dim();
    if basis_new.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: basis_new.dim() });
    }
    if reduced.dim() != basis_old.rank() {
        return Err(Error::DimensionMismatch { expected: basis_old.rank(), got: reduced.dim() });
    }
    let phi_r_old = basis_old.phi_r();
    let phi_p_old = basis_old.phi_perp();
    let mu = phi_r_old * &reduced.mean;
    let sigma1 = phi_r_old * &reduced.cov * phi_r_old.transpose();
    let sigma2 = phi_p_old * phi_p_old.transpose();
    let s = sigma1 + sigma2;

    let r = basis_new.rank();
    let new_r = basis_new.phi_r();
    let new_p = basis_new.phi_perp();
    let mean = basis_new.vectors().tr_mul(&mu);
    let mut cov = DMatrix::zeros(d, d);
    cov.view_mut((0, 0), (r, r)).copy_from(&(new_r.transpose() * &s * new_r));
    cov.view_mut((0, r), (r, d - r)).copy_from(&(new_r.transpose() * &s * new_p));
    cov.view_mut((r, 0), (d - r, r)).copy_from(&(new_p.transpose() * &s * new_r));
    cov.view_mut((r, r), (d - r, d - r)).copy_from(&(new_p.transpose() * &s * new_p));
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianParams { mean, cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::QR;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params(mean: &[f64], cov: &[f64]) -> GaussianParams {
        let k = mean.len();
        GaussianParams::new(DVector::from_column_slice(mean), DMatrix::from_row_slice(k, k, cov)).unwrap()
    }

    fn random_orthonormal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        QR::new(standard_normal_matrix(d, d, rng)).q()
    }

    fn random_spd(k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = standard_normal_matrix(k, k, rng);
        &a * a.transpose() + DMatrix::identity(k, k) * 0.2
    }

    #[test]
    fn logpdf_closed_forms() {
        let v = gaussian_logpdf(&[0.0], &params(&[0.0], &[1.0])).unwrap();
        assert!((v + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        let v = gaussian_logpdf(&[0.0, 0.0], &GaussianParams::standard(2)).unwrap();
        assert!((v + (2.0 * PI).ln()).abs() < 1e-15);
        let v = gaussian_logpdf(&[3.0], &params(&[1.0], &[4.0])).unwrap();
        assert!((v - (-0.5 * (8.0 * PI).ln() - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn logpdf_far_tail_is_finite() {
        let v = gaussian_logpdf(&[40.0, -40.0], &GaussianParams::standard(2)).unwrap();
        assert!((v - (-(2.0 * PI).ln() - 1600.0)).abs() < 1e-10);
    }

    #[test]
    fn logpdf_dimension_mismatch() {
        let r = gaussian_logpdf(&[0.0, 1.0], &GaussianParams::standard(3));
        assert_eq!(r, Err(Error::DimensionMismatch { expected: 3, got: 2 }));
    }

    #[test]
    fn zero_covariance_is_jittered() {
        let p = params(&[1.5, -2.0], &[0.0, 0.0, 0.0, 0.0]);
        let f = p.factor().unwrap();
        assert!(f.jitter() > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = f.sample(100, &mut rng);
        for c in x.column_iter() {
            assert!((c[0] - 1.5).abs() < 1e-100 && (c[1] + 2.0).abs() < 1e-100);
        }
    }

    #[test]
    fn rank_deficient_covariance_gets_relative_jitter() {
        let p = params(&[0.0, 0.0], &[1.0, 1.0, 1.0, 1.0]);
        let f = p.factor().unwrap();
        assert!(f.jitter() > 0.0 && f.jitter() <= 1e-6);
    }

    #[test]
    fn sample_mean_within_clt_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = sample_gaussian(&GaussianParams::standard(1), 1_000_000, &mut rng).unwrap();
        assert!(x.mean().abs() < 4.0 / 1000.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = params(&[1.0, 2.0], &[2.0, 0.5, 0.5, 1.0]);
        let a = sample_gaussian(&p, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_gaussian(&p, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_weight_fit_is_sample_moments() {
        let x = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 2.0, 2.0, 3.0, 1.0]);
        let p = fit_gaussian_weighted(&x, &[1.0, 1.0, 1.0]).unwrap();
        assert!((p.mean[0] - 2.0).abs() < 1e-15 && (p.mean[1] - 1.0).abs() < 1e-15);
        // deviations: (-1,-1), (0,1), (1,0)
        let expected = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert!((p.cov - expected).amax() < 1e-15);
    }

    #[test]
    fn single_weight_fit_is_point_mass() {
        let x = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 2.0, 2.0, 3.0, 1.0]);
        let p = fit_gaussian_weighted(&x, &[0.0, 4.0, 0.0]).unwrap();
        assert_eq!(p.mean.as_slice(), &[2.0, 2.0]);
        assert_eq!(p.cov.amax(), 0.0);
        assert!(p.factor().unwrap().jitter() > 0.0);
    }

    #[test]
    fn fit_rejects_zero_weights() {
        let x = DMatrix::zeros(2, 2);
        assert_eq!(fit_gaussian_weighted(&x, &[0.0, 0.0]), Err(Error::AllWeightsZero));
    }

    #[test]
    fn fit_is_weight_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = standard_normal_matrix(3, 20, &mut rng);
        let w: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..1.0)).collect();
        let a = fit_gaussian_weighted(&x, &w).unwrap();
        for c in [1e-8, 3.0, 1e12] {
            let wc: Vec<f64> = w.iter().map(|v| v * c).collect();
            let b = fit_gaussian_weighted(&x, &wc).unwrap();
            assert!((&a.mean - &b.mean).amax() <= 1e-14 * a.mean.amax());
            assert!((&a.cov - &b.cov).amax() <= 1e-14 * a.cov.amax());
        }
    }

    #[test]
    fn sample_then_fit_recovers_parameters() {
        let p = params(&[1.0, -2.0], &[2.0, 0.6, 0.6, 0.5]);
        let n = 100_000;
        let x = sample_gaussian(&p, n, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        let fit = fit_gaussian_weighted(&x, &vec![1.0; n]).unwrap();
        let bound = 5.0 * 2f64.sqrt() / (n as f64).sqrt();
        assert!((&fit.mean - &p.mean).norm() <= bound);
        // sampling sd of a covariance entry ≈ sqrt((Σ_ii Σ_jj + Σ_ij²)/n)
        for i in 0..2 {
            for j in 0..2 {
                let sd = ((p.cov[(i, i)] * p.cov[(j, j)] + p.cov[(i, j)].powi(2)) / n as f64).sqrt();
                assert!((fit.cov[(i, j)] - p.cov[(i, j)]).abs() <= 5.0 * sd);
            }
        }
    }

    #[test]
    fn logpdf_integrates_to_one() {
        let p = params(&[0.3, -0.2], &[1.0, 0.4, 0.4, 0.8]);
        let f = p.factor().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let half = 10.0;
        let n = 400_000;
        let u = DMatrix::from_fn(2, n, |_, _| rng.random_range(-half..half));
        let vals = f.logpdf_columns(&u).unwrap();
        let est = vals.iter().map(|v| v.exp()).sum::<f64>() / n as f64 * (2.0 * half).powi(2);
        assert!((est - 1.0).abs() < 1e-2 * 4.0, "{est}");
    }

    #[test]
    fn composite_examples() {
        let basis = FisBasis::canonical(3, 1);
        let c = CompositeBiasing::new(params(&[2.0], &[1.0]), basis).unwrap();
        let v = c.composite_logpdf(&[2.0, 0.0, 0.0]).unwrap();
        assert!((v + 1.5 * (2.0 * PI).ln()).abs() < 1e-14);

        let full =
            CompositeBiasing::new(params(&[0.5, 1.0], &[2.0, 0.3, 0.3, 1.0]), FisBasis::canonical(2, 2)).unwrap();
        let direct = gaussian_logpdf(&[0.1, 0.7], full.reduced()).unwrap();
        assert!((full.composite_logpdf(&[0.1, 0.7]).unwrap() - direct).abs() < 1e-15);

        let std = CompositeBiasing::new(GaussianParams::standard(2), FisBasis::canonical(5, 2)).unwrap();
        let x = [0.3, -1.0, 2.0, 0.1, -0.4];
        let direct = gaussian_logpdf(&x, &GaussianParams::standard(5)).unwrap();
        assert!((std.composite_logpdf(&x).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn identity_adjustment_is_block_diagonal() {
        let basis = FisBasis::canonical(4, 2);
        let reduced = params(&[1.0, -1.0], &[2.0, 0.5, 0.5, 1.0]);
        let adj = adjust_reference_params(&reduced, &basis, &basis).unwrap();
        assert_eq!(adj.mean.as_slice(), &[1.0, -1.0, 0.0, 0.0]);
        let mut expected = DMatrix::identity(4, 4);
        expected.view_mut((0, 0), (2, 2)).copy_from(&reduced.cov);
        assert!((adj.cov - expected).amax() < 1e-15);
    }

    #[test]
    fn standard_reduced_stays_standard() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let old = FisBasis::new(vec![0.0; 5], 2, random_orthonormal(5, &mut rng)).unwrap();
        let new = FisBasis::new(vec![0.0; 5], 3, random_orthonormal(5, &mut rng)).unwrap();
        let adj = adjust_reference_params(&GaussianParams::standard(2), &old, &new).unwrap();
        assert!(adj.mean.amax() < 1e-15);
        assert!((adj.cov - DMatrix::<f64>::identity(5, 5)).amax() < 1e-14);
    }

    #[test]
    fn structured_and_dense_adjustment_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let d = 6;
        let old = FisBasis::new(vec![0.0; d], 2, random_orthonormal(d, &mut rng)).unwrap();
        let new = FisBasis::new(vec![0.0; d], 3, random_orthonormal(d, &mut rng)).unwrap();
        let reduced = GaussianParams::new(DVector::from_vec(vec![0.7, -1.2]), random_spd(2, &mut rng)).unwrap();
        let dense = adjust_reference_params(&reduced, &old, &new).unwrap();
        let comp = CompositeBiasing::new(reduced, old).unwrap();
        let adj = AdjustedReference::new(&comp, &new).unwrap();
        let structured = adj.params();
        assert!((&dense.mean - &structured.mean).amax() < 1e-13);
        assert!((&dense.cov - &structured.cov).amax() < 1e-13);

        let theta = standard_normal_matrix(d, 20, &mut rng) * 2.0;
        let local = new.vectors().tr_mul(&theta);
        let a = adj.logpdf_columns(&local).unwrap();
        let b = dense.factor().unwrap().logpdf_columns(&local).unwrap();
        let c = comp.logpdf_global(&theta).unwrap();
        let ratio = adj.ln_prior_ratio(&local).unwrap();
        let prior = standard_normal_logpdf_columns(&theta);
        for i in 0..20 {
            assert!((a[i] - b[i]).abs() < 1e-10);
            assert!((a[i] - c[i]).abs() < 1e-10);
            assert!((ratio[i] - (prior[i] - c[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn composite_sampling_matches_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let d = 4;
        let basis = FisBasis::new(vec![0.0; d], 1, random_orthonormal(d, &mut rng)).unwrap();
        let comp = CompositeBiasing::new(params(&[3.0], &[0.25]), basis.clone()).unwrap();
        let n = 200_000;
        let (theta, theta_r) = comp.sample(n, &mut rng);
        let (tr, tp) = crate::fis::project(&theta, &basis).unwrap();
        assert!((tr - &theta_r).amax() < 1e-12);
        let fit = fit_gaussian_weighted(&tp, &vec![1.0; n]).unwrap();
        assert!(fit.mean.amax() < 0.02);
        assert!((fit.cov - DMatrix::<f64>::identity(d - 1, d - 1)).amax() < 0.02);
        let m = theta_r.mean();
        assert!((m - 3.0).abs() < 0.01);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn fit_is_invariant_to_weight_scale(seed in any::<u64>(), k in 1usize..5, n in 2usize..40, c in 1e-8..1e8f64) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = standard_normal_matrix(k, n, &mut rng);
                let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
                let wc: Vec<f64> = w.iter().map(|v| v * c).collect();
                let a = fit_gaussian_weighted(&x, &w);
                let b = fit_gaussian_weighted(&x, &wc);
                match (a, b) {
                    (Ok(a), Ok(b)) => {
                        let scale = a.cov.amax().max(a.mean.amax()).max(1e-300);
                        prop_assert!((&a.mean - &b.mean).amax() <= 1e-14 * scale.max(1.0));
                        prop_assert!((&a.cov - &b.cov).amax() <= 1e-14 * scale);
                    }
                    (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
                }
            }
        }
    }
}
