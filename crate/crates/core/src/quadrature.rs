//! Gauss–Legendre rules and an adaptive composite integrator.

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[a, b]`,
/// nodes ascending.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = (b - a) / 2.0;
    let mid = (b + a) / 2.0;
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[n - 1 - i] = mid + half * x;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive bisection with a 20-point Gauss–Legendre rule on each panel.
///
/// A panel is accepted when its estimate agrees with the sum over its two
/// halves to within `abs_tol` scaled by the panel's share of the interval.
pub fn integrate_adaptive<F>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    const ORDER: usize = 20;
    const MAX_DEPTH: u32 = 40;
    let (ref_nodes, ref_weights) = gauss_legendre(ORDER, -1.0, 1.0);
    let panel = |lo: f64, hi: f64| -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        ref_nodes.iter().zip(&ref_weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
    };

    let width = b - a;
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    let mut stack = vec![(a, b, panel(a, b), 0u32)];
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(lo, mid);
        let right = panel(mid, hi);
        let err = (left + right - whole).abs();
        let budget = abs_tol * (hi - lo) / width;
        if err <= budget {
            total += left + right;
        } else if depth >= MAX_DEPTH {
            worst = worst.max(err);
            total += left + right;
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    if worst > abs_tol {
        return Err(Error::QuadratureFailure(worst));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(10, 0.0, 2.0);
        // exact for degree ≤ 19
        let est: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(19)).sum();
        let exact = 2f64.powi(20) / 20.0;
        assert!((est - exact).abs() / exact < 1e-13);
        let sum_w: f64 = w.iter().sum();
        assert!((sum_w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn nodes_sorted_and_symmetric() {
        let (x, w) = gauss_legendre(7, -1.0, 1.0);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        assert!(x[3].abs() < 1e-15);
        for i in 0..7 {
            assert!((x[i] + x[6 - i]).abs() < 1e-15);
            assert!((w[i] - w[6 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn adaptive_gaussian_integral() {
        let v = integrate_adaptive(|x| (-0.5 * x * x).exp(), -12.0, 12.0, 1e-13).unwrap();
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }
}
