use rand::Rng;

use crate::densities::{standard_normal_matrix, CompositeBiasing};
use crate::error::Result;

use super::stats::is_estimate;
use super::{evaluate_batch, EstimationResult, LimitState, SolverConfig};

/// Final-level data handed from iCEred to the refinement loop.
#[derive(Debug, Clone)]
pub struct RefineState {
    /// Final biasing density; `None` means the prior (run stopped at level 0).
    pub biasing: Option<CompositeBiasing>,
    pub dim: usize,
    pub failed: Vec<bool>,
    pub ln_w: Vec<f64>,
}

/// Rounds without a single failure after which refinement gives up, in
/// units of `m_check`.
const ZERO_ESTIMATE_LIMIT: usize = 100;
/// Hard cap on refinement rounds, in units of `m_check`.
const ROUND_LIMIT: usize = 1000;

/// Adds batches of `M` LSF-only samples from the final biasing density until
/// the cv of the estimate is small enough.
///
/// Round `k` (from 1) computes the estimate and its cv. The loop ends when
/// the first cv is already at most `δ̄`, or when `k` is a multiple of `m`
/// and the mean of the last `m` cvs is at most `δ̄`. Otherwise `M` samples
/// are appended. The appended weights use only the FIS coordinates.
pub fn refine<P, R>(
    problem: &P,
    state: RefineState,
    mut result: EstimationResult,
    config: &SolverConfig,
    rng: &mut R,
) -> Result<EstimationResult>
where
    P: LimitState + ?Sized,
    R: Rng + ?Sized,
{
    let RefineState { biasing, dim, mut failed, mut ln_w } = state;
    let m = config.m_check;
    let batch = config.m_increment;
    let mut history: Vec<f64> = Vec::new();
    let mut k = 1usize;
    let (p0, cv0) = is_estimate(&failed, &ln_w);
    result.cv_before_refine = Some(cv0);

    loop {
        let (p, cv) = if k == 1 { (p0, cv0) } else { is_estimate(&failed, &ln_w) };
        history.push(cv);
        result.p_hat = p;
        result.cv_hat = cv;

        let done = if k == 1 {
            cv <= config.delta_bar
        } else if k.is_multiple_of(m) {
            let recent = &history[history.len() - m..];
            recent.iter().sum::<f64>() / m as f64 <= config.delta_bar
        } else {
            false
        };
        if done {
            return Ok(result);
        }
        if p == 0.0 && k >= ZERO_ESTIMATE_LIMIT * m {
            result.converged = false;
            result.note = Some("refinement aborted: no failure samples".into());
            return Ok(result);
        }
        if k >= ROUND_LIMIT * m {
            result.converged = false;
            result.note = Some("refinement round limit reached".into());
            return Ok(result);
        }

        let (theta, extra_ln_w) = match &biasing {
            None => (standard_normal_matrix(dim, batch, rng), vec![0.0; batch]),
            Some(b) => {
                let (theta, theta_r) = b.sample(batch, rng);
                let lw = b.ln_prior_ratio(&theta_r)?;
                (theta, lw)
            }
        };
        let g = evaluate_batch(problem, &theta)?;
        result.lsf_calls += batch;
        failed.extend(g.iter().map(|v| *v <= 0.0));
        ln_w.extend(extra_ln_w);
        k += 1;
    }
}
