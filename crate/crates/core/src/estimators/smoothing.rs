//! Choice of the next smoothing parameter: the `s ∈ (0, s_prev)` whose
//! smoothed weights `f(g; s)·w` have a cv closest to the target `δ`.
//! Only the stored LSF values are used.

use crate::error::{Error, Result};
use crate::indicators::{ln_smooth_indicator, SmoothIndicatorKind};

use super::stats::weighted_cv;

const GRID_POINTS: usize = 64;
const GOLDEN_ITERS: usize = 200;
const LN_S_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingUpdate {
    pub s: f64,
    /// cv of the smoothed weights at `s`.
    pub cv: f64,
    /// The objective was flat; `s` is the halved fallback.
    pub degenerate: bool,
}

/// Same as [`adapt_smoothing_ln`] with weights given directly.
pub fn adapt_smoothing(
    g: &[f64],
    weights: &[f64],
    s_prev: f64,
    delta: f64,
    kind: SmoothIndicatorKind,
) -> Result<SmoothingUpdate> {
    let ln_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    adapt_smoothing_ln(g, &ln_w, s_prev, delta, kind)
}

/// Minimizes `(cv[f(g; s)·w] − δ)²` over `ln s`.
///
/// A 64-point logarithmic grid on `[s_min, s_prev]` locates the best
/// bracket, which golden-section search then refines. `s_min` is `1e-8`
/// times the interquartile range of `|g|`. At level 0 (`s_prev = ∞`) the
/// upper end is `10 · max|g|`.
pub fn adapt_smoothing_ln(
    g: &[f64],
    ln_w: &[f64],
    s_prev: f64,
    delta: f64,
    kind: SmoothIndicatorKind,
) -> Result<SmoothingUpdate> {
    if g.len() != ln_w.len() {
        return Err(Error::DimensionMismatch { expected: g.len(), got: ln_w.len() });
    }
    if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidLsfValue(*bad));
    }
    if s_prev.is_nan() || s_prev <= 0.0 {
        return Err(Error::InvalidSmoothing(s_prev));
    }
    let abs: Vec<f64> = g.iter().map(|v| v.abs()).collect();
    let max_abs = abs.iter().copied().fold(0.0, f64::max);
    let s_ub = if s_prev.is_finite() {
        s_prev
    } else if max_abs > 0.0 {
        10.0 * max_abs
    } else {
        1.0
    };

    let objective = |ln_s: f64| -> f64 {
        match smoothed_cv(g, ln_w, ln_s.exp(), kind) {
            Some(cv) => (cv - delta).powi(2),
            None => f64::INFINITY,
        }
    };
    let fallback = |ub: f64| {
        let s = 0.5 * ub;
        SmoothingUpdate { s, cv: smoothed_cv(g, ln_w, s, kind).unwrap_or(f64::NAN), degenerate: true }
    };

    let mut s_min = 1e-8 * interquartile_range(&abs);
    if !(s_min > 0.0) {
        s_min = 1e-8 * max_abs;
    }
    if !(s_min > 0.0) {
        return Ok(fallback(s_ub));
    }
    if s_min >= 0.5 * s_ub {
        s_min = 1e-8 * s_ub;
    }

    let lo = s_min.ln();
    let hi = s_ub.ln();
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&x| objective(x)).collect();

    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Ok(fallback(s_ub));
    }
    let vmax = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let vmin = finite.iter().copied().fold(f64::INFINITY, f64::min);
    if vmax - vmin <= 1e-10 * vmax.abs().max(1.0) {
        return Ok(fallback(s_ub));
    }

    let best = (0..GRID_POINTS).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(GRID_POINTS - 1)];
    let (mut x, fx) = golden_section(&objective, a, b);
    if values[best] < fx {
        x = grid[best];
    }
    let mut s = x.exp();
    if s_prev.is_finite() && s >= s_prev {
        s = s_prev * (1.0 - 1e-12);
    }
    let cv = smoothed_cv(g, ln_w, s, kind).unwrap_or(f64::NAN);
    Ok(SmoothingUpdate { s, cv, degenerate: false })
}

fn smoothed_cv(g: &[f64], ln_w: &[f64], s: f64, kind: SmoothIndicatorKind) -> Option<f64> {
    let ln_v: Vec<f64> = g
        .iter()
        .zip(ln_w)
        .map(|(gi, lw)| ln_smooth_indicator(*gi, s, kind).map(|lf| lf + lw))
        .collect::<Result<_>>()
        .ok()?;
    let v = super::relative_weights(&ln_v);
    weighted_cv(&v).ok()
}

fn interquartile_range(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        if i + 1 < v.len() {
            v[i] + frac * (v[i + 1] - v[i])
        } else {
            v[i]
        }
    };
    q(0.75) - q(0.25)
}

fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_ITERS {
        if (b - a).abs() < LN_S_TOL {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
