//! Failure indicator and its smooth approximations.
//!
//! The failure set is `{θ : g(θ) ≤ 0}`. Two smoothings of the indicator are
//! supported, both parameterized by a scale `s > 0`:
//!
//! * logistic: `f = ½[1 + tanh(-g/s)]`
//! * Gaussian CDF: `f = Φ(-g/s)`
//!
//! Both tend to the exact indicator as `s → 0` and are identically ½ at
//! `s = ∞`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{normal_cdf, normal_hazard, normal_ln_cdf};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothIndicatorKind {
    #[default]
    Logistic,
    GaussianCdf,
}

/// Exact failure indicator: `true` iff `g ≤ 0`.
pub fn indicator(g: f64) -> Result<bool> {
    if g.is_nan() {
        return Err(Error::InvalidLsfValue(g));
    }
    Ok(g <= 0.0)
}

fn check_smoothing(s: f64) -> Result<()> {
    if s.is_nan() || s <= 0.0 {
        return Err(Error::InvalidSmoothing(s));
    }
    Ok(())
}

pub fn smooth_indicator(g: f64, s: f64, kind: SmoothIndicatorKind) -> Result<f64> {
    check_smoothing(s)?;
    if g.is_nan() {
        return Err(Error::InvalidLsfValue(g));
    }
    if s.is_infinite() {
        return Ok(0.5);
    }
    let x = g / s;
    Ok(match kind {
        // ½[1 + tanh(-x)] = 1 / (1 + e^{2x}), without the cancellation near 0
        SmoothIndicatorKind::Logistic => 1.0 / (1.0 + (2.0 * x).exp()),
        SmoothIndicatorKind::GaussianCdf => normal_cdf(-x),
    })
}

/// `ln f(g; s)`, finite wherever `g` and `s` are finite.
pub fn ln_smooth_indicator(g: f64, s: f64, kind: SmoothIndicatorKind) -> Result<f64> {
    check_smoothing(s)?;
    if g.is_nan() {
        return Err(Error::InvalidLsfValue(g));
    }
    if s.is_infinite() {
        return Ok(-std::f64::consts::LN_2);
    }
    let x = g / s;
    Ok(match kind {
        SmoothIndicatorKind::Logistic => -softplus(2.0 * x),
        SmoothIndicatorKind::GaussianCdf => normal_ln_cdf(-x),
    })
}

fn softplus(y: f64) -> f64 {
    if y > 0.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

/// Derivative of `ln f(g; s)` with respect to `g`.
///
/// The gradient of `ln f(θ; s)` is this slope times `∇g(θ)`.
pub fn ln_smooth_indicator_slope(g: f64, s: f64, kind: SmoothIndicatorKind) -> Result<f64> {
    check_smoothing(s)?;
    if !g.is_finite() {
        return Err(Error::InvalidLsfValue(g));
    }
    if s.is_infinite() {
        return Err(Error::InvalidSmoothing(s));
    }
    let x = g / s;
    Ok(match kind {
        // 1 + tanh(x) = 2 / (1 + e^{-2x})
        SmoothIndicatorKind::Logistic => -(2.0 / (1.0 + (-2.0 * x).exp())) / s,
        SmoothIndicatorKind::GaussianCdf => -normal_hazard(-x) / s,
    })
}

/// `∇ ln f(θ; s)` given `g(θ)` and `∇g(θ)`.
pub fn grad_log_smooth_indicator(g: f64, grad_g: &[f64], s: f64, kind: SmoothIndicatorKind) -> Result<Vec<f64>> {
    if let Some(bad) = grad_g.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidLsfValue(*bad));
    }
    let slope = ln_smooth_indicator_slope(g, s, kind)?;
    Ok(grad_g.iter().map(|v| slope * v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use SmoothIndicatorKind::*;

    #[test]
    fn indicator_convention() {
        assert!(indicator(-0.3).unwrap());
        assert!(indicator(0.0).unwrap());
        assert!(!indicator(2.5).unwrap());
        assert!(matches!(indicator(f64::NAN), Err(Error::InvalidLsfValue(_))));
    }

    #[test]
    fn smooth_indicator_values() {
        for kind in [Logistic, GaussianCdf] {
            assert_eq!(smooth_indicator(0.0, 0.7, kind).unwrap(), 0.5);
            for g in [-3.0, 0.0, 12.0] {
                assert_eq!(smooth_indicator(g, f64::INFINITY, kind).unwrap(), 0.5);
            }
            assert!(matches!(smooth_indicator(1.0, 0.0, kind), Err(Error::InvalidSmoothing(_))));
            assert!(matches!(smooth_indicator(1.0, -2.0, kind), Err(Error::InvalidSmoothing(_))));
        }
        let v = smooth_indicator(1.0, 1.0, GaussianCdf).unwrap();
        assert!((v - 0.158_655_253_931_457).abs() < 1e-12);
        let v = smooth_indicator(0.4, 0.2, Logistic).unwrap();
        assert!((v - 0.5 * (1.0 + (-2.0f64).tanh())).abs() < 1e-15);
    }

    #[test]
    fn symmetry_is_exact() {
        for kind in [Logistic, GaussianCdf] {
            for i in 0..100 {
                let g = -6.0 + 12.0 * i as f64 / 99.0;
                let s = 0.05 + i as f64 * 0.1;
                let sum = smooth_indicator(g, s, kind).unwrap() + smooth_indicator(-g, s, kind).unwrap();
                assert!((sum - 1.0).abs() < 1e-14, "{kind:?} g={g} s={s}");
            }
        }
    }

    #[test]
    fn gradient_at_zero() {
        let grad = [0.5, -1.0];
        let s = 0.25;
        let log = grad_log_smooth_indicator(0.0, &grad, s, Logistic).unwrap();
        let erf = grad_log_smooth_indicator(0.0, &grad, s, GaussianCdf).unwrap();
        let c = (2.0 / std::f64::consts::PI).sqrt();
        for i in 0..2 {
            assert!((log[i] + grad[i] / s).abs() < 1e-15);
            assert!((erf[i] + grad[i] / s * c).abs() < 1e-14);
        }
    }

    #[test]
    fn logistic_gradient_saturates() {
        let g = grad_log_smooth_indicator(50.0, &[1.0, 3.0], 1.0, Logistic).unwrap();
        assert!((g[0] + 2.0).abs() < 1e-15);
        assert!((g[1] + 6.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_cdf_gradient_stable_in_deep_safe_tail() {
        for ratio in [8.5, 20.0, 39.0, 100.0, 200.0] {
            let v = grad_log_smooth_indicator(ratio, &[1.0], 1.0, GaussianCdf).unwrap();
            assert!(v[0].is_finite());
            // hazard ≈ z for large z
            assert!((v[0] + ratio).abs() / ratio < 0.02);
        }
    }

    #[test]
    fn monotone_in_smoothing() {
        for kind in [Logistic, GaussianCdf] {
            let mut prev_pos = 0.0;
            let mut prev_neg = 1.0;
            for i in 1..50 {
                let s = 0.05 * i as f64;
                let pos = smooth_indicator(1.3, s, kind).unwrap();
                let neg = smooth_indicator(-1.3, s, kind).unwrap();
                assert!(pos >= prev_pos);
                assert!(neg <= prev_neg);
                prev_pos = pos;
                prev_neg = neg;
            }
        }
    }

    #[test]
    fn ln_matches_log_of_value() {
        for kind in [Logistic, GaussianCdf] {
            for g in [-2.0, -0.1, 0.0, 0.3, 4.0] {
                let f = smooth_indicator(g, 0.7, kind).unwrap();
                let lf = ln_smooth_indicator(g, 0.7, kind).unwrap();
                assert!((f.ln() - lf).abs() < 1e-13);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn kind() -> impl Strategy<Value = SmoothIndicatorKind> {
            prop_oneof![Just(Logistic), Just(GaussianCdf)]
        }

        proptest! {
            #[test]
            fn symmetric(g in -50.0..50.0f64, s in 0.01..10.0f64, k in kind()) {
                let sum = smooth_indicator(g, s, k).unwrap() + smooth_indicator(-g, s, k).unwrap();
                prop_assert!((sum - 1.0).abs() <= 1e-14);
            }

            #[test]
            fn monotone_in_s(g in -10.0..10.0f64, s in 0.05..5.0f64, ds in 0.0..5.0f64, k in kind()) {
                let a = smooth_indicator(g, s, k).unwrap();
                let b = smooth_indicator(g, s + ds, k).unwrap();
                if g > 0.0 {
                    prop_assert!(b >= a);
                } else {
                    prop_assert!(b <= a);
                }
            }

            #[test]
            fn slope_matches_finite_difference(x in -20.0..20.0f64, s in 0.05..10.0f64, k in kind()) {
                let g = x * s;
                let h = 1e-5 * s;
                let fd = (ln_smooth_indicator(g + h, s, k).unwrap() - ln_smooth_indicator(g - h, s, k).unwrap()) / (2.0 * h);
                let slope = ln_smooth_indicator_slope(g, s, k).unwrap();
                prop_assert!((fd - slope).abs() <= 1e-5 * slope.abs(), "fd {} vs {}", fd, slope);
            }
        }
    }
}
