use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;

use crate::densities::{fit_gaussian_weighted, standard_normal_matrix, AdjustedReference, CompositeBiasing};
use crate::error::{Error, Result};
use crate::fis::{fis_basis_from_gradients, FisBasis};
use crate::indicators::{ln_smooth_indicator, ln_smooth_indicator_slope};

use super::refine::{refine, RefineState};
use super::smoothing::adapt_smoothing_ln;
use super::stats::{is_estimate, stopping_cv, weighted_cv};
use super::{evaluate_batch, gradient_batch, relative_weights, EstimationResult, LevelDiag, LimitState, SolverConfig};

/// Spectrum of `Ĥ` at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpectrum {
    pub level: usize,
    pub eigvals: Vec<f64>,
    pub rank: usize,
    /// The basis was carried over because `Ĥ` could not be formed.
    pub reused: bool,
}

#[derive(Debug, Clone)]
pub struct IceredTrace {
    pub result: EstimationResult,
    pub spectra: Vec<LevelSpectrum>,
    /// Basis of the final biasing density, if any level built one.
    pub final_basis: Option<FisBasis>,
}

/// iCE restricted to a failure-informed subspace, optionally followed by
/// refinement.
pub fn run_icered<P, R>(problem: &P, config: &SolverConfig, rng: &mut R) -> Result<EstimationResult>
where
    P: LimitState + ?Sized,
    R: Rng + ?Sized,
{
    run_icered_traced(problem, config, rng).map(|t| t.result)
}

/// [`run_icered`] that also returns the per-level spectra and final basis.
pub fn run_icered_traced<P, R>(problem: &P, config: &SolverConfig, rng: &mut R) -> Result<IceredTrace>
where
    P: LimitState + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    if !problem.has_gradient() {
        return Err(Error::MissingGradient);
    }
    let d = problem.dim();
    let n = config.n_per_level;
    let n_grad = config.n_grad();
    let kind = config.kind;

    let mut biasing: Option<CompositeBiasing> = None;
    let mut s = f64::INFINITY;
    let mut per_level = Vec::new();
    let mut spectra = Vec::new();
    let mut lsf_calls = 0;
    let mut grad_calls = 0;
    let mut level = 0;

    macro_rules! bail {
        ($levels:expr, $err:expr) => {{
            let final_basis = biasing.as_ref().map(|b| b.basis().clone());
            let result = EstimationResult::failed($levels, lsf_calls, grad_calls, per_level, &$err);
            return Ok(IceredTrace { result, spectra, final_basis });
        }};
    }

    loop {
        let start = Instant::now();
        let (theta, ln_w) = match &biasing {
            None => (standard_normal_matrix(d, n, rng), vec![0.0; n]),
            Some(b) => {
                let (theta, theta_r) = b.sample(n, rng);
                let ln_w = b.ln_prior_ratio(&theta_r)?;
                (theta, ln_w)
            }
        };
        let g = evaluate_batch(problem, &theta)?;
        lsf_calls += n;
        let failed: Vec<bool> = g.iter().map(|v| *v <= 0.0).collect();
        let ln_f: Vec<f64> = g.iter().map(|gi| ln_smooth_indicator(*gi, s, kind)).collect::<Result<_>>()?;
        let stop = stopping_cv(&failed, &ln_f);
        let mut diag = LevelDiag { level, s, stop_cv: Some(stop.cv), excluded: stop.excluded, ..Default::default() };

        if stop.cv <= config.delta || level >= config.t_max {
            diag.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            per_level.push(diag);
            let converged = stop.cv <= config.delta;
            let (p, cv) = is_estimate(&failed, &ln_w);
            let mut result = EstimationResult {
                p_hat: p,
                cv_hat: cv,
                n_levels: level + 1,
                lsf_calls,
                grad_calls,
                converged,
                per_level,
                cv_before_refine: None,
                note: (!converged).then(|| "level budget exhausted".to_string()),
            };
            if config.refine && converged {
                let state = RefineState { biasing: biasing.clone(), dim: d, failed, ln_w };
                result = refine(problem, state, result, config, rng)?;
            }
            let final_basis = biasing.map(|b| b.basis().clone());
            return Ok(IceredTrace { result, spectra, final_basis });
        }

        let update = adapt_smoothing_ln(&g, &ln_w, s, config.delta, kind)?;
        s = update.s;
        diag.s_next = Some(s);
        diag.smoothing_degenerate = update.degenerate;
        let ln_f: Vec<f64> = g.iter().map(|gi| ln_smooth_indicator(*gi, s, kind)).collect::<Result<_>>()?;
        let ln_wt: Vec<f64> = ln_f.iter().zip(&ln_w).map(|(a, b)| a + b).collect();

        // ∇ln f = slope(g) ∇g on the first n_grad samples
        let grads = gradient_batch(problem, &theta, n_grad);
        grad_calls += n_grad;
        let basis = grads.and_then(|mut gm| {
            for (j, mut col) in gm.column_iter_mut().enumerate() {
                col *= ln_smooth_indicator_slope(g[j], s, kind)?;
            }
            fis_basis_from_gradients(&gm, &relative_weights(&ln_wt[..n_grad]), config.eps)
        });
        let (basis, reused) = match (basis, &biasing) {
            (Ok(b), _) => (b, false),
            (Err(Error::MissingGradient), _) => return Err(Error::MissingGradient),
            (Err(_), Some(prev)) => (prev.basis().clone(), true),
            (Err(e), None) => {
                per_level.push(diag);
                bail!(level + 1, e)
            }
        };
        spectra.push(LevelSpectrum { level, eigvals: basis.eigvals().to_vec(), rank: basis.rank(), reused });
        diag.rank = Some(basis.rank());

        let local = basis.vectors().tr_mul(&theta);
        let theta_r: DMatrix<f64> = local.rows(0, basis.rank()).into_owned();
        let ln_wbar: Vec<f64> = match &biasing {
            None => ln_f.clone(),
            Some(old) => {
                let adjusted = AdjustedReference::new(old, &basis)?;
                let ratio = adjusted.ln_prior_ratio(&local)?;
                ln_f.iter().zip(&ratio).map(|(a, b)| a + b).collect()
            }
        };
        let w = relative_weights(&ln_wbar);
        diag.weights_cv = weighted_cv(&w).ok();
        diag.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        per_level.push(diag);

        let next = fit_gaussian_weighted(&theta_r, &w).and_then(|p| CompositeBiasing::new(p, basis));
        match next {
            Ok(b) => biasing = Some(b),
            Err(e) => bail!(level + 1, e),
        }
        level += 1;
    }
}
