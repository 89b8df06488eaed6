use std::time::Instant;

use rand::Rng;

use crate::densities::{fit_gaussian_weighted_factored, standard_normal_logpdf_columns, GaussianParams};
use crate::error::Result;

use super::stats::{is_estimate, weighted_cv};
use super::{evaluate_batch, relative_weights, EstimationResult, LevelDiag, LimitState, SolverConfig};

/// Standard cross-entropy method with a full-dimensional Gaussian family.
///
/// At each level the threshold `γ` is the `⌈Nρ⌉`-th smallest LSF value,
/// floored at 0. Once it reaches 0 the failed samples of that level fit the
/// final biasing density, and a fresh batch drawn from it gives the estimate.
/// `n_levels` counts threshold levels; that last batch is not one of them.
pub fn run_ce<P, R>(problem: &P, config: &SolverConfig, rng: &mut R) -> Result<EstimationResult>
where
    P: LimitState + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let d = problem.dim();
    let n = config.n_per_level;
    let elite = ((n as f64 * config.rho).ceil() as usize).clamp(1, n);
    let mut factor = GaussianParams::standard(d).factor()?;
    let mut per_level = Vec::new();
    let mut lsf_calls = 0;
    let mut fitted_final = false;

    for level in 0..=config.t_max {
        let start = Instant::now();
        let theta = factor.sample(n, rng);
        let ln_w: Vec<f64> = if level == 0 {
            vec![0.0; n]
        } else {
            let prior = standard_normal_logpdf_columns(&theta);
            let bias = factor.logpdf_columns(&theta)?;
            prior.iter().zip(&bias).map(|(a, b)| a - b).collect()
        };
        let g = evaluate_batch(problem, &theta)?;
        lsf_calls += n;

        let mut sorted = g.clone();
        sorted.sort_by(f64::total_cmp);
        let gamma = if fitted_final { 0.0 } else { sorted[elite - 1].max(0.0) };
        let mut diag = LevelDiag { level, s: f64::NAN, gamma: Some(gamma), ..Default::default() };

        if fitted_final || level == config.t_max {
            let failed: Vec<bool> = g.iter().map(|v| *v <= 0.0).collect();
            let (p, cv) = is_estimate(&failed, &ln_w);
            diag.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            per_level.push(diag);
            return Ok(EstimationResult {
                p_hat: p,
                cv_hat: cv,
                n_levels: if fitted_final { level } else { level + 1 },
                lsf_calls,
                grad_calls: 0,
                converged: fitted_final,
                per_level,
                cv_before_refine: None,
                note: (!fitted_final).then(|| "level budget exhausted".to_string()),
            });
        }

        let ln_fit: Vec<f64> =
            g.iter().zip(&ln_w).map(|(gi, lw)| if *gi <= gamma { *lw } else { f64::NEG_INFINITY }).collect();
        let w = relative_weights(&ln_fit);
        diag.weights_cv = weighted_cv(&w).ok();
        diag.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        per_level.push(diag);
        fitted_final = gamma <= 0.0;
        match fit_gaussian_weighted_factored(&theta, &w) {
            Ok((_, f)) => factor = f,
            Err(e) => return Ok(EstimationResult::failed(level + 1, lsf_calls, 0, per_level, &e)),
        }
    }
    unreachable!("the last level always returns")
}
