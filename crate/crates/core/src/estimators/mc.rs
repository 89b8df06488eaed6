use rand::Rng;

use crate::densities::standard_normal_matrix;
use crate::error::Result;

use super::{evaluate_batch, EstimationResult, LimitState};

const CHUNK: usize = 10_000;

/// Crude Monte Carlo: `p̂ = (1/n) Σ 𝟙{g ≤ 0}`, `cv = √((1 − p̂)/(n p̂))`.
///
/// Samples are drawn and evaluated in chunks so that very large `n` does
/// not need to be held in memory at once.
pub fn run_mc<P, R>(problem: &P, n: usize, rng: &mut R) -> Result<EstimationResult>
where
    P: LimitState + ?Sized,
    R: Rng + ?Sized,
{
    let d = problem.dim();
    let mut failures = 0usize;
    let mut done = 0usize;
    while done < n {
        let m = CHUNK.min(n - done);
        let theta = standard_normal_matrix(d, m, rng);
        let g = evaluate_batch(problem, &theta)?;
        failures += g.iter().filter(|v| **v <= 0.0).count();
        done += m;
    }
    let p = failures as f64 / n.max(1) as f64;
    let cv = if p > 0.0 { ((1.0 - p) / (n as f64 * p)).sqrt() } else { f64::INFINITY };
    Ok(EstimationResult {
        p_hat: p,
        cv_hat: cv,
        n_levels: 1,
        lsf_calls: n,
        grad_calls: 0,
        converged: true,
        per_level: Vec::new(),
        cv_before_refine: None,
        note: None,
    })
}
