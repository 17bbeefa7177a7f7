//! Small special-function and quadrature-rule helpers shared across the crate.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub use libm::{j0 as bessel_j0, j1 as bessel_j1, tgamma as gamma};

use std::f64::consts::PI;

/// Surface area of the unit sphere S^{N-1} in R^N.
pub fn sphere_area(dim: usize) -> f64 {
    2.0 * PI.powf(dim as f64 / 2.0) / gamma(dim as f64 / 2.0)
}

/// Volume of the unit ball in R^N.
pub fn ball_volume(dim: usize) -> f64 {
    PI.powf(dim as f64 / 2.0) / gamma(dim as f64 / 2.0 + 1.0)
}

/// Normalization constant of the fractional Laplacian of order 2s in R^N,
/// 4^s Γ(N/2 + s) / (π^{N/2} |Γ(-s)|), so that the kernel C |y|^{-(N+2s)}
/// yields the Fourier multiplier -|ξ|^{2s}.
pub fn frac_laplacian_constant(dim: usize, s: f64) -> f64 {
    assert!(s > 0.0 && s < 1.0, "order parameter s must lie in (0,1)");
    let n = dim as f64;
    4.0_f64.powf(s) * gamma(n / 2.0 + s) / (PI.powf(n / 2.0) * gamma(-s).abs())
}

/// Nodes and weights of one Gauss rule.
pub type GaussRule = Arc<(Vec<f64>, Vec<f64>)>;

/// Gauss-Legendre nodes and weights on [-1, 1], cached per node count.
pub fn gauss_legendre(n: usize) -> GaussRule {
    static CACHE: OnceLock<Mutex<HashMap<usize, GaussRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(compute_gauss_legendre(n)))
        .clone()
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss nodes/weights mapped to the interval [a, b].
pub fn gauss_on_interval(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    rule.0
        .iter()
        .zip(rule.1.iter())
        .map(|(&x, &w)| (mid + half * x, half * w))
        .collect()
}

/// Least-squares line fit; returns (slope, intercept).
pub fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_integrates_polynomials() {
        for n in [4, 10, 16] {
            let pts = gauss_on_interval(n, 0.0, 1.0);
            let integral: f64 = pts.iter().map(|&(x, w)| w * x * x).sum();
            assert_relative_eq!(integral, 1.0 / 3.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1), 2.0, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(2), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn frac_constant_matches_cauchy_case() {
        // N = 1, s = 1/2: the kernel constant of the half Laplacian is 1/π.
        assert_relative_eq!(frac_laplacian_constant(1, 0.5), 1.0 / PI, max_relative = 1e-12);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.25).collect();
        let (m, b) = line_fit(&xs, &ys);
        assert_relative_eq!(m, 2.5, max_relative = 1e-12);
        assert_relative_eq!(b, -1.25, max_relative = 1e-12);
    }
}
