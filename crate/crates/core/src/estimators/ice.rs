use std::time::Instant;

use rand::Rng;

use crate::densities::{fit_gaussian_weighted_factored, standard_normal_logpdf_columns, GaussianParams};
use crate::error::Result;
use crate::indicators::ln_smooth_indicator;

use super::smoothing::adapt_smoothing_ln;
use super::stats::{is_estimate, stopping_cv, weighted_cv};
use super::{evaluate_batch, relative_weights, EstimationResult, LevelDiag, LimitState, SolverConfig};

/// Improved cross-entropy method with a full-dimensional Gaussian family.
pub fn run_ice<P, R>(problem: &P, config: &SolverConfig, rng: &mut R) -> Result<EstimationResult>
where
    P: LimitState + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let d = problem.dim();
    let n = config.n_per_level;
    let kind = config.kind;
    let mut factor = GaussianParams::standard(d).factor()?;
    let mut s = f64::INFINITY;
    let mut per_level = Vec::new();
    let mut lsf_calls = 0;
    let mut level = 0;

    loop {
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
        let failed: Vec<bool> = g.iter().map(|v| *v <= 0.0).collect();
        let ln_f: Vec<f64> = g.iter().map(|gi| ln_smooth_indicator(*gi, s, kind)).collect::<Result<_>>()?;
        let stop = stopping_cv(&failed, &ln_f);
        let mut diag = LevelDiag { level, s, stop_cv: Some(stop.cv), excluded: stop.excluded, ..Default::default() };

        if stop.cv <= config.delta || level >= config.t_max {
            let (p, cv) = is_estimate(&failed, &ln_w);
            diag.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            per_level.push(diag);
            let converged = stop.cv <= config.delta;
            return Ok(EstimationResult {
                p_hat: p,
                cv_hat: cv,
                n_levels: level + 1,
                lsf_calls,
                grad_calls: 0,
                converged,
                per_level,
                cv_before_refine: None,
                note: (!converged).then(|| "level budget exhausted".to_string()),
            });
        }

        let update = adapt_smoothing_ln(&g, &ln_w, s, config.delta, kind)?;
        s = update.s;
        let ln_fit: Vec<f64> = g
            .iter()
            .zip(&ln_w)
            .map(|(gi, lw)| ln_smooth_indicator(*gi, s, kind).map(|lf| lf + lw))
            .collect::<Result<_>>()?;
        let w = relative_weights(&ln_fit);
        diag.s_next = Some(s);
        diag.smoothing_degenerate = update.degenerate;
        diag.weights_cv = weighted_cv(&w).ok();
        diag.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        per_level.push(diag);
        match fit_gaussian_weighted_factored(&theta, &w) {
            Ok((_, f)) => factor = f,
            Err(e) => return Ok(EstimationResult::failed(level + 1, lsf_calls, 0, per_level, &e)),
        }
        level += 1;
    }
}
