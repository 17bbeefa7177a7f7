//! Fundamental-solution exponents: the scalar symbol C(σ) of the extremal
//! operators on power functions, and the root σ with M±|x|^σ = 0 away from
//! the origin. The associated dimension-like number is Ñ = 2s - σ.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::AnalyticField;
use crate::kernel::EllipticityBounds;
use crate::operator::{extremal, OperatorValue, OpSign};
use crate::quad::QuadratureConfig;

/// End guard of the σ scan: excludes the trivial σ = 0 root and the σ = -N
/// divergence.
const SCAN_GUARD: f64 = 1e-3;
/// Scan resolution before bisection.
const SCAN_POINTS: usize = 33;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FundamentalExponent {
    pub sigma: f64,
    #[serde(rename = "Ntilde")]
    pub ntilde: f64,
    pub sign: OpSign,
    pub residual: f64,
    pub bracket: (f64, f64),
}

/// C(σ): the extremal operator applied to |x|^σ at the unit point. By
/// homogeneity M(|·|^σ)(x) = |x|^{σ-2s} C(σ).
pub fn power_symbol(
    sigma: f64,
    bounds: &EllipticityBounds,
    sign: OpSign,
    cfg: &QuadratureConfig,
) -> Result<OperatorValue> {
    let n = bounds.dim as f64;
    if !(sigma > -n && sigma < 2.0 * bounds.s) || sigma == 0.0 {
        return Err(Error::Domain(format!(
            "sigma = {sigma} outside the admissible interval (-N, 2s) \\ {{0}}"
        )));
    }
    let field = AnalyticField::power(sigma);
    extremal(&field, bounds, sign, 1.0, cfg)
}

/// Scan-then-bisect for the root of C(σ) on (-N + ε₀, -ε₀).
pub fn solve_sigma(
    bounds: &EllipticityBounds,
    sign: OpSign,
    tol: f64,
    cfg: &QuadratureConfig,
) -> Result<FundamentalExponent> {
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive".to_string()));
    }
    let n = bounds.dim as f64;
    let lo = -n + SCAN_GUARD;
    let hi = -SCAN_GUARD;
    scan_and_bisect(bounds, sign, lo, hi, tol, cfg).map_err(|e| match e {
        Error::NoExponent(_) => Error::NoExponent(format!(
            "C(sigma) has no sign change on ({lo}, {hi}) for {sign:?}"
        )),
        other => other,
    })
}

fn scan_and_bisect(
    bounds: &EllipticityBounds,
    sign: OpSign,
    lo: f64,
    hi: f64,
    tol: f64,
    cfg: &QuadratureConfig,
) -> Result<FundamentalExponent> {
    let sigmas: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let values: Vec<f64> = sigmas
        .par_iter()
        .map(|&sg| power_symbol(sg, bounds, sign, cfg).map(|v| v.value))
        .collect::<Result<Vec<_>>>()?;

    // Take the sign change closest to 0 (scanning downward from -ε₀).
    let mut bracket = None;
    for i in (0..SCAN_POINTS - 1).rev() {
        if values[i] == 0.0 {
            bracket = Some((sigmas[i], sigmas[i], values[i], values[i]));
            break;
        }
        if values[i] * values[i + 1] < 0.0 {
            bracket = Some((sigmas[i], sigmas[i + 1], values[i], values[i + 1]));
            break;
        }
    }
    let (mut a, mut b, mut fa, _fb) =
        bracket.ok_or_else(|| Error::NoExponent("no sign change in scan".to_string()))?;

    for _ in 0..80 {
        if (b - a).abs() < tol {
            break;
        }
        let mid = 0.5 * (a + b);
        let fmid = power_symbol(mid, bounds, sign, cfg)?.value;
        if fmid == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if fa * fmid < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fmid;
        }
    }
    let sigma = 0.5 * (a + b);
    let residual = if a == b { 0.0 } else { power_symbol(sigma, bounds, sign, cfg)?.value.abs() };
    Ok(FundamentalExponent {
        sigma,
        ntilde: 2.0 * bounds.s - sigma,
        sign,
        residual,
        bracket: (a, b),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PlusCondition {
    pub holds: bool,
    pub margin: f64,
    #[serde(rename = "Ntilde")]
    pub ntilde: f64,
}

/// Whether Ñ⁺ > 2s. When no root lies in (-N, 0) the scan extends to the
/// growing powers (0, 2s) to locate Ñ⁺ < 2s and report the (negative) margin.
pub fn check_plus_condition(
    bounds: &EllipticityBounds,
    cfg: &QuadratureConfig,
) -> Result<PlusCondition> {
    let tol = 1e-4;
    match solve_sigma(bounds, OpSign::Plus, tol, cfg) {
        Ok(exp) => Ok(PlusCondition {
            holds: true,
            margin: exp.ntilde - 2.0 * bounds.s,
            ntilde: exp.ntilde,
        }),
        Err(Error::NoExponent(_)) => {
            let lo = SCAN_GUARD;
            let hi = 2.0 * bounds.s - SCAN_GUARD;
            let exp = scan_and_bisect(bounds, OpSign::Plus, lo, hi, tol, cfg)?;
            Ok(PlusCondition {
                holds: false,
                margin: exp.ntilde - 2.0 * bounds.s,
                ntilde: exp.ntilde,
            })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    /// Closed-form symbol of the normalized fractional Laplacian on powers:
    /// Δ^s |x|^{-β} = -c(β) |x|^{-β-2s} with
    /// c(β) = 4^s Γ((β+2s)/2) Γ((N-β)/2) / (Γ(β/2) Γ((N-β-2s)/2)).
    fn closed_symbol(beta: f64, n: f64, s: f64) -> f64 {
        -(4.0_f64.powf(s) * gamma((beta + 2.0 * s) / 2.0) * gamma((n - beta) / 2.0)
            / (gamma(beta / 2.0) * gamma((n - beta - 2.0 * s) / 2.0)))
    }

    #[test]
    fn symbol_matches_closed_form_in_linear_case() {
        let b = EllipticityBounds::fractional_laplacian(2, 0.75).unwrap();
        for beta in [0.7, 1.0, 1.3] {
            let v = power_symbol(-beta, &b, OpSign::Plus, &cfg()).unwrap();
            let exact = closed_symbol(beta, 2.0, 0.75);
            assert!(
                (v.value - exact).abs() <= 1e-4 * exact.abs().max(0.1),
                "beta={beta}: {} vs {exact}",
                v.value
            );
        }
    }

    #[test]
    fn symbol_vanishes_at_linear_fundamental_exponent() {
        let b = EllipticityBounds::fractional_laplacian(2, 0.75).unwrap();
        let v = power_symbol(2.0 * 0.75 - 2.0, &b, OpSign::Plus, &cfg()).unwrap();
        assert!(v.value.abs() < 1e-4, "{}", v.value);
    }

    #[test]
    fn symbol_changes_sign_across_the_root() {
        // Linear case: C < 0 on (2s-N, 0), C > 0 below 2s-N.
        let b = EllipticityBounds::fractional_laplacian(2, 0.75).unwrap();
        let above = power_symbol(-0.2, &b, OpSign::Plus, &cfg()).unwrap().value;
        let below = power_symbol(-1.2, &b, OpSign::Plus, &cfg()).unwrap().value;
        assert!(above < 0.0 && below > 0.0, "{above} {below}");
    }

    #[test]
    fn solve_sigma_linear_case() {
        let b = EllipticityBounds::fractional_laplacian(2, 0.75).unwrap();
        let e = solve_sigma(&b, OpSign::Plus, 1e-5, &cfg()).unwrap();
        assert!((e.sigma - (-0.5)).abs() < 1e-4, "sigma {}", e.sigma);
        assert!((e.ntilde - 2.0).abs() < 1e-4);
        assert_eq!(e.ntilde, 2.0 * b.s - e.sigma);
    }

    #[test]
    fn pucci_minus_dimension_number_dominates_n() {
        let b = EllipticityBounds::new(1.0, 2.0, 0.75, 2).unwrap();
        let e = solve_sigma(&b, OpSign::Minus, 1e-4, &cfg()).unwrap();
        assert!(e.ntilde >= 2.0 - 1e-3, "Ntilde- = {}", e.ntilde);
    }

    #[test]
    fn bracket_endpoints_have_opposite_signs() {
        let b = EllipticityBounds::new(1.0, 2.0, 0.75, 2).unwrap();
        let e = solve_sigma(&b, OpSign::Minus, 1e-4, &cfg()).unwrap();
        let fa = power_symbol(e.bracket.0, &b, OpSign::Minus, &cfg()).unwrap().value;
        let fb = power_symbol(e.bracket.1, &b, OpSign::Minus, &cfg()).unwrap().value;
        assert!(fa * fb <= 0.0);
    }

    #[test]
    fn residual_is_small_at_the_root() {
        let b = EllipticityBounds::fractional_laplacian(2, 0.6).unwrap();
        let e = solve_sigma(&b, OpSign::Plus, 1e-5, &cfg()).unwrap();
        // |C(σ)| < 10·tol·|C'| with |C'| estimated from the scan scale.
        let slope = {
            let d = 0.05;
            let up = power_symbol(e.sigma + d, &b, OpSign::Plus, &cfg()).unwrap().value;
            let dn = power_symbol(e.sigma - d, &b, OpSign::Plus, &cfg()).unwrap().value;
            ((up - dn) / (2.0 * d)).abs()
        };
        assert!(e.residual < 10.0 * 1e-5 * slope.max(1.0), "res {} slope {slope}", e.residual);
    }

    #[test]
    fn plus_condition_examples() {
        // Linear N=2, s=0.75: Ñ = N = 2 > 1.5, margin 0.5.
        let b2 = EllipticityBounds::fractional_laplacian(2, 0.75).unwrap();
        let c2 = check_plus_condition(&b2, &cfg()).unwrap();
        assert!(c2.holds);
        assert!((c2.margin - 0.5).abs() < 1e-3, "margin {}", c2.margin);

        // Linear N=1, s=0.75: Ñ = 1 < 1.5, margin -0.5.
        let b1 = EllipticityBounds::fractional_laplacian(1, 0.75).unwrap();
        let c1 = check_plus_condition(&b1, &cfg()).unwrap();
        assert!(!c1.holds);
        assert!((c1.margin - (-0.5)).abs() < 1e-3, "margin {}", c1.margin);
    }

    #[test]
    fn exponent_rejects_out_of_range_sigma() {
        let b = EllipticityBounds::fractional_laplacian(2, 0.75).unwrap();
        assert!(power_symbol(-2.5, &b, OpSign::Plus, &cfg()).is_err());
        assert!(power_symbol(1.6, &b, OpSign::Plus, &cfg()).is_err());
    }

    #[test]
    fn near_linear_class_stays_near_linear_exponent() {
        let b = EllipticityBounds::new(1.0, 1.05, 0.75, 3).unwrap();
        let plus = solve_sigma(&b, OpSign::Plus, 1e-4, &cfg()).unwrap();
        let minus = solve_sigma(&b, OpSign::Minus, 1e-4, &cfg()).unwrap();
        assert!((plus.ntilde - 3.0).abs() < 0.3, "{}", plus.ntilde);
        assert!((minus.ntilde - 3.0).abs() < 0.3, "{}", minus.ntilde);
        assert!(minus.ntilde >= 3.0 - 1e-3 && plus.ntilde <= 3.0 + 1e-3);
    }
}
