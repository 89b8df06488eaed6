use crate::error::{Error, Result};

/// Population coefficient of variation (standard deviation over mean, both
/// normalized by `n`) of non-negative values.
pub fn weighted_cv(values: &[f64]) -> Result<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(Error::AllWeightsZero);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

/// Importance-sampling estimate `p̂ = (1/N) Σ 𝟙_i w_i` and its cv,
/// `V̂ = [(1/N) Σ 𝟙_i w_i² − p̂²] / (N − 1)`, `cv = √V̂ / p̂`.
pub fn is_estimate(failed: &[bool], ln_w: &[f64]) -> (f64, f64) {
    let n = failed.len() as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (d, lw) in failed.iter().zip(ln_w) {
        if *d {
            let w = lw.exp();
            sum += w;
            sum_sq += w * w;
        }
    }
    let p = sum / n;
    if !(p > 0.0) {
        return (p, f64::INFINITY);
    }
    let var = ((sum_sq / n - p * p) / (n - 1.0).max(1.0)).max(0.0);
    (p, var.sqrt() / p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingCv {
    pub cv: f64,
    /// Samples skipped because their smooth indicator underflowed.
    pub excluded: usize,
}

/// `cv(𝟙/f)` from indicator values and `ln f`. Samples with `f < 1e-300`
/// are skipped; without any failure the statistic is infinite.
pub fn stopping_cv(failed: &[bool], ln_f: &[f64]) -> StoppingCv {
    let floor = 1e-300f64.ln();
    let mut excluded = 0;
    let mut ratios = Vec::with_capacity(failed.len());
    for (d, lf) in failed.iter().zip(ln_f) {
        if *lf < floor {
            excluded += 1;
            continue;
        }
        ratios.push(if *d { (-lf).exp() } else { 0.0 });
    }
    let cv = if ratios.is_empty() { f64::INFINITY } else { weighted_cv(&ratios).unwrap_or(f64::INFINITY) };
    StoppingCv { cv, excluded }
}
