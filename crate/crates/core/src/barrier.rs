//! Closed-form sub/supersolutions and numerical certificates for their
//! operator inequalities: the decaying bump (M²+|x|²)^{-β/2}, the fundamental
//! power |x|^σ, the capped supersolution min(c|x|^σ, |x|^{-β}) and the
//! drifted subsolution with a mollifier bump. The constants in the underlying
//! estimates are existential, so each verification fits empirical witnesses
//! (c_emp, C_emp, crossover λ_emp) and reports per-radius margins.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exponent::solve_sigma;
use crate::field::{AnalyticField, RadialFn};
use crate::kernel::EllipticityBounds;
use crate::operator::{extremal, OpSign};
use crate::quad::QuadratureConfig;
use crate::report::{PointRecord, VerificationReport};
use crate::special::{gauss_on_interval, sphere_area};

/// Closed-form barrier families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BarrierSpec {
    /// φ_{M,β}(x) = (M² + |x|²)^{-β/2}, subsolution family (β ≥ N+2s, M ≥ 1).
    SubVarphi { m: f64, beta: f64 },
    /// E(x) = |x|^σ, the fundamental power.
    FundamentalE { sigma: f64 },
    /// Φ_{β,c} = min(c|x|^σ, |x|^{-β}) with kink radius r_c = c^{-1/(β+σ)}.
    SuperPhi { beta: f64, c: f64, sigma: f64 },
    /// ψ = (M + |x|²)^{-β/2} + C₀η - ε|x|^{σ'}, η the normalized mollifier
    /// bump on the unit ball.
    PsiSub { m: f64, beta: f64, c0: f64, eps: f64, sigma_p: f64 },
}

impl BarrierSpec {
    pub fn validate(&self, bounds: &EllipticityBounds) -> Result<()> {
        let n = bounds.dim as f64;
        let two_s = 2.0 * bounds.s;
        match *self {
            BarrierSpec::SubVarphi { m, beta } => {
                if beta < n + two_s {
                    return Err(Error::Precondition(format!("beta = {beta} < N+2s")));
                }
                if m < 1.0 {
                    return Err(Error::Precondition(format!("M = {m} < 1")));
                }
            }
            BarrierSpec::FundamentalE { sigma } => {
                if !(sigma > -n && sigma < 0.0) {
                    return Err(Error::Precondition(format!("sigma = {sigma} outside (-N, 0)")));
                }
            }
            BarrierSpec::SuperPhi { beta, c, sigma } => {
                if !(n < beta && beta <= n + two_s) {
                    return Err(Error::Precondition(format!("beta = {beta} outside (N, N+2s]")));
                }
                if !(c > 0.0) {
                    return Err(Error::Precondition("c must be positive".to_string()));
                }
                if !(beta + sigma > 0.0) {
                    return Err(Error::Precondition("beta + sigma must be positive".to_string()));
                }
            }
            BarrierSpec::PsiSub { m, beta, c0, eps, sigma_p } => {
                if m < 1.0 || c0 < 0.0 || eps < 0.0 {
                    return Err(Error::Precondition("need M ≥ 1, C0 ≥ 0, eps ≥ 0".to_string()));
                }
                if (beta - (n + two_s)).abs() > 1e-12 {
                    return Err(Error::Precondition("psi uses beta = N + 2s".to_string()));
                }
                if !(-beta < sigma_p && sigma_p < 0.0) {
                    return Err(Error::Precondition(format!(
                        "sigma' = {sigma_p} outside (-beta, 0)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Kink radius of the capped supersolution.
    pub fn kink_radius(&self) -> Option<f64> {
        match *self {
            BarrierSpec::SuperPhi { beta, c, sigma } => Some(c.powf(-1.0 / (beta + sigma))),
            _ => None,
        }
    }

    /// Closed-form field with declared derivative; `dim` fixes the mollifier
    /// normalization of the ψ family.
    pub fn field(&self, dim: usize) -> AnalyticField {
        match *self {
            BarrierSpec::SubVarphi { m, beta } => AnalyticField::new(
                format!("varphi(M={m},beta={beta})"),
                move |r: f64| (m * m + r * r).powf(-beta / 2.0),
                move |r: f64| -beta * r * (m * m + r * r).powf(-beta / 2.0 - 1.0),
            ),
            BarrierSpec::FundamentalE { sigma } => AnalyticField::power(sigma),
            BarrierSpec::SuperPhi { beta, c, sigma } => {
                let r_c = self.kink_radius().unwrap();
                AnalyticField::new(
                    format!("Phi(beta={beta},c={c})"),
                    move |r: f64| (c * r.powf(sigma)).min(r.powf(-beta)),
                    move |r: f64| {
                        if r < r_c {
                            c * sigma * r.powf(sigma - 1.0)
                        } else {
                            -beta * r.powf(-beta - 1.0)
                        }
                    },
                )
                .with_origin_exponent(sigma)
                .with_structural_radii(vec![r_c])
            }
            BarrierSpec::PsiSub { m, beta, c0, eps, sigma_p } => {
                let kappa = bump_normalization(dim);
                AnalyticField::new(
                    format!("psi(M={m},C0={c0},eps={eps},sigma'={sigma_p})"),
                    move |r: f64| {
                        (m + r * r).powf(-beta / 2.0) + c0 * bump(kappa, r)
                            - eps * r.powf(sigma_p)
                    },
                    move |r: f64| {
                        let core = -beta * r * (m + r * r).powf(-beta / 2.0 - 1.0);
                        let b = if r < 1.0 {
                            let q = 1.0 - r * r;
                            c0 * bump(kappa, r) * (-2.0 * r / (q * q))
                        } else {
                            0.0
                        };
                        core + b - eps * sigma_p * r.powf(sigma_p - 1.0)
                    },
                )
                .with_origin_exponent(sigma_p)
                .with_structural_radii(vec![1.0])
            }
        }
    }
}

#[inline]
fn bump(kappa: f64, r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        kappa * (-1.0 / (1.0 - r * r)).exp()
    }
}

/// κ with ∫_{B₁} κ e^{-1/(1-|x|²)} dx = 1, cached per dimension.
pub fn bump_normalization(dim: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    *guard.entry(dim).or_insert_with(|| {
        let mass: f64 = gauss_on_interval(80, 0.0, 1.0)
            .into_iter()
            .map(|(r, w)| w * (-1.0 / (1.0 - r * r)).exp() * r.powi(dim as i32 - 1))
            .sum();
        1.0 / (sphere_area(dim) * mass)
    })
}

/// Mass of the normalized bump (diagnostic; 1 up to quadrature error).
pub fn bump_mass(dim: usize) -> f64 {
    let kappa = bump_normalization(dim);
    sphere_area(dim)
        * gauss_on_interval(120, 0.0, 1.0)
            .into_iter()
            .map(|(r, w)| w * bump(kappa, r) * r.powi(dim as i32 - 1))
            .sum::<f64>()
}

/// Closed-form barrier value.
pub fn eval_barrier(spec: &BarrierSpec, dim: usize, r: f64) -> Result<f64> {
    let singular = matches!(
        spec,
        BarrierSpec::FundamentalE { .. } | BarrierSpec::PsiSub { .. } | BarrierSpec::SuperPhi { .. }
    );
    if singular && r == 0.0 {
        return Err(Error::Domain("barrier singular at the origin".to_string()));
    }
    Ok(spec.field(dim).eval(r))
}

fn eval_minus_on_radii(
    field: &AnalyticField,
    bounds: &EllipticityBounds,
    radii: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<(f64, f64, f64)>> {
    radii
        .par_iter()
        .map(|&r| {
            let v = extremal(field, bounds, OpSign::Minus, r, cfg)?;
            Ok((r, v.value, v.error_estimate))
        })
        .collect()
}

/// Certificate for the decay-side estimate of the subsolution family:
/// M⁻φ_{M,β} stays above -C Γ M^{-2s} φ near the origin and above
/// c γ M^{-2s} φ beyond an empirical crossover λ_emp·M.
pub fn verify_subsolution(
    bounds: &EllipticityBounds,
    m: f64,
    beta: f64,
    radii: &[f64],
    cfg: &QuadratureConfig,
) -> Result<VerificationReport> {
    let spec = BarrierSpec::SubVarphi { m, beta };
    spec.validate(bounds)?;
    let field = spec.field(bounds.dim);
    let two_s = 2.0 * bounds.s;
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    let vals = eval_minus_on_radii(&field, bounds, &radii, cfg)?;

    // Crossover: smallest sampled radius after which M⁻φ stays positive.
    let mut cross_idx = vals.len();
    for i in (0..vals.len()).rev() {
        if vals[i].1 > 0.0 {
            cross_idx = i;
        } else {
            break;
        }
    }
    let mut report = VerificationReport::new(format!("subsolution M={m} beta={beta}"));
    let weight = |r: f64| bounds.gamma * m.powf(-two_s) * field.eval(r);
    let mut c_emp = f64::INFINITY;
    let mut cc_emp: f64 = 0.0;
    for (i, &(r, v, e)) in vals.iter().enumerate() {
        if i >= cross_idx {
            c_emp = c_emp.min(v / weight(r));
            report.records.push(PointRecord::new(r, v, 0.0, e));
        } else {
            let c_here = -v / (bounds.gamma_up * m.powf(-two_s) * field.eval(r));
            cc_emp = cc_emp.max(c_here);
            report.records.push(PointRecord::new(
                r,
                v,
                (-c_here.max(0.0)) * bounds.gamma_up * m.powf(-two_s) * field.eval(r) - 1e-300,
                e,
            ));
        }
    }
    if cross_idx == vals.len() {
        report.notes.push("no positive crossover found in the sampled radii".to_string());
        c_emp = f64::NEG_INFINITY;
    }
    report.set_constant("lambda_emp", if cross_idx < vals.len() { vals[cross_idx].0 / m } else { f64::NAN });
    report.set_constant("c_emp", c_emp);
    report.set_constant("C_emp", cc_emp.max(0.0));
    Ok(report)
}

/// Certificate for the drifted subsolution estimate:
/// M⁻φ + (r/2s)·φ' ≥ -((β - c)/2s)·φ with empirical slack
/// c_emp = min over radii of [2s·lhs/φ + β]; positive c_emp certifies.
pub fn verify_corollary(
    bounds: &EllipticityBounds,
    m: f64,
    beta: f64,
    radii: &[f64],
    cfg: &QuadratureConfig,
) -> Result<VerificationReport> {
    let spec = BarrierSpec::SubVarphi { m, beta };
    spec.validate(bounds)?;
    bounds.require_gradient_subordination()?;
    let field = spec.field(bounds.dim);
    let two_s = 2.0 * bounds.s;
    let vals = eval_minus_on_radii(&field, bounds, radii, cfg)?;
    let mut report = VerificationReport::new(format!("corollary M={m} beta={beta}"));
    let mut c_emp = f64::INFINITY;
    for &(r, v, e) in &vals {
        let lhs = v + r / two_s * field.derivative(r);
        let phi = field.eval(r);
        let rhs = -(beta / two_s) * phi;
        c_emp = c_emp.min(two_s * lhs / phi + beta);
        report.records.push(PointRecord::new(r, lhs, rhs, e));
    }
    report.set_constant("c_emp", c_emp);
    if c_emp <= 0.0 {
        report.notes.push("M below empirical M0 (no positive slack)".to_string());
    }
    Ok(report)
}

/// Exclusion band around the kink radius where classical evaluation of the
/// capped supersolution is meaningless.
const KINK_BAND: f64 = 0.05;

/// Certificate for the capped supersolution: M⁺Φ ≤ 0 inside the kink radius
/// and M⁺Φ ≤ C_emp·Γ·c^θ·Φ outside, with the c^θ scaling probed by halving c.
pub fn verify_supersolution(
    bounds: &EllipticityBounds,
    beta: f64,
    c: f64,
    radii: &[f64],
    cfg: &QuadratureConfig,
) -> Result<VerificationReport> {
    let sigma = solve_sigma(bounds, OpSign::Plus, 1e-5, cfg)?.sigma;
    let run = |c: f64, report: Option<&mut VerificationReport>| -> Result<f64> {
        let spec = BarrierSpec::SuperPhi { beta, c, sigma };
        spec.validate(bounds)?;
        let r_c = spec.kink_radius().unwrap();
        let theta = (beta - bounds.dim as f64) / (beta + sigma);
        let field = spec.field(bounds.dim);
        let usable: Vec<f64> = radii
            .iter()
            .copied()
            .filter(|&r| r > 0.0 && ((r / r_c) - 1.0).abs() > KINK_BAND)
            .collect();
        let vals: Vec<(f64, f64, f64)> = usable
            .par_iter()
            .map(|&r| {
                let v = extremal(&field, bounds, OpSign::Plus, r, cfg)?;
                Ok((r, v.value, v.error_estimate))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut c_emp: f64 = 0.0;
        for &(r, v, _) in &vals {
            if r > r_c {
                c_emp = c_emp.max(v / (bounds.gamma_up * c.powf(theta) * field.eval(r)));
            }
        }
        if let Some(report) = report {
            report.set_constant("sigma", sigma);
            report.set_constant("theta", theta);
            report.set_constant("r_c", r_c);
            for &(r, v, e) in &vals {
                if r <= r_c {
                    // claim: 0 - M⁺Φ ≥ 0
                    report.records.push(PointRecord::new(r, -v, 0.0, e));
                } else {
                    let bound = c_emp.max(0.0) * bounds.gamma_up * c.powf(theta) * field.eval(r);
                    report.records.push(PointRecord::new(r, bound - v, 0.0, e));
                }
            }
        }
        Ok(c_emp)
    };
    let mut report = VerificationReport::new(format!("supersolution beta={beta} c={c}"));
    let c_full = run(c, Some(&mut report))?;
    let c_half = run(c / 2.0, None)?;
    let ratio = c_half.max(1e-9) / c_full.max(1e-9);
    report.set_constant("C_emp", c_full);
    report.set_constant("C_emp_half_c", c_half);
    report.set_constant("stability_ratio", ratio);
    if !(1.0 / 3.0..=3.0).contains(&ratio) {
        report.notes.push(format!("c^theta scaling unstable: ratio {ratio}"));
    }
    Ok(report)
}

/// Search result of the doubling ladder for the drifted subsolution ψ.
#[derive(Debug, Clone)]
pub struct PsiCertificate {
    pub m: f64,
    pub c0: f64,
    pub eps: f64,
    pub report: VerificationReport,
}

/// Certificate for M⁺ψ + (r/2s)·ψ' ≥ (σ'/2s)·ψ on radii ≥ 2, searching the
/// bump amplitude over the doubling ladder C₀ ∈ {1, 2, 4, ..., 1024}.
pub fn verify_psi(
    bounds: &EllipticityBounds,
    m: f64,
    eps: f64,
    sigma_p: f64,
    radii: &[f64],
    cfg: &QuadratureConfig,
) -> Result<PsiCertificate> {
    bounds.require_gradient_subordination()?;
    if radii.iter().any(|&r| r < 2.0) {
        return Err(Error::Precondition("psi is certified on radii ≥ 2 only".to_string()));
    }
    let n = bounds.dim as f64;
    let two_s = 2.0 * bounds.s;
    let beta = n + two_s;
    let mut worst: Option<(f64, f64)> = None;
    for k in 0..=10 {
        let c0 = (1u64 << k) as f64;
        let spec = BarrierSpec::PsiSub { m, beta, c0, eps, sigma_p };
        spec.validate(bounds)?;
        let field = spec.field(bounds.dim);
        let vals: Vec<PointRecord> = radii
            .par_iter()
            .map(|&r| {
                let v = extremal(&field, bounds, OpSign::Plus, r, cfg)?;
                let lhs = v.value + r / two_s * field.derivative(r);
                let rhs = sigma_p / two_s * field.eval(r);
                Ok(PointRecord::new(r, lhs, rhs, v.error_estimate))
            })
            .collect::<Result<Vec<_>>>()?;
        let min_margin = vals.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
        if vals.iter().all(|p| !p.violated()) {
            let mut report = VerificationReport::new(format!(
                "psi M={m} C0={c0} eps={eps} sigma'={sigma_p}"
            ));
            report.records = vals;
            report.set_constant("M", m);
            report.set_constant("C0", c0);
            report.set_constant("eps", eps);
            report.set_constant("bump_mass", bump_mass(bounds.dim));
            return Ok(PsiCertificate { m, c0, eps, report });
        }
        match worst {
            Some((_, best)) if min_margin <= best => {}
            _ => worst = Some((c0, min_margin)),
        }
    }
    let (c0, margin) = worst.unwrap();
    Err(Error::Convergence(format!(
        "no certificate found on the C0 ladder; best rung C0={c0} with worst margin {margin}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn linear_bounds() -> EllipticityBounds {
        EllipticityBounds::fractional_laplacian(2, 0.75).unwrap()
    }

    #[test]
    fn barrier_eval_examples() {
        // φ_{2,4}(0) = 2^{-4}
        let v = eval_barrier(&BarrierSpec::SubVarphi { m: 2.0, beta: 4.0 }, 2, 0.0).unwrap();
        assert_relative_eq!(v, 0.0625, max_relative = 1e-14);

        // Φ with β=3, c=0.1, σ=-0.5: kink at 0.1^{-1/2.5}, both branches equal there.
        let spec = BarrierSpec::SuperPhi { beta: 3.0, c: 0.1, sigma: -0.5 };
        let r_c = spec.kink_radius().unwrap();
        assert_relative_eq!(r_c, 0.1f64.powf(-0.4), max_relative = 1e-14);
        let phi = spec.field(2);
        assert_relative_eq!(phi.eval(r_c), r_c.powf(-3.0), max_relative = 1e-12);

        // ψ at r = 1.5 (bump vanished): (M+2.25)^{-β/2} - ε·1.5^{σ'}
        let (m, beta, eps, sp) = (2.0, 3.5, 0.01, -0.4);
        let psi = BarrierSpec::PsiSub { m, beta, c0: 7.0, eps, sigma_p: sp }.field(2);
        let expect = (m + 2.25f64).powf(-beta / 2.0) - eps * 1.5f64.powf(sp);
        assert_relative_eq!(psi.eval(1.5), expect, max_relative = 1e-13);
    }

    #[test]
    fn barrier_rejects_singular_origin() {
        assert!(eval_barrier(&BarrierSpec::FundamentalE { sigma: -0.5 }, 2, 0.0).is_err());
    }

    #[test]
    fn branch_switch_is_exact_at_kink() {
        let spec = BarrierSpec::SuperPhi { beta: 3.0, c: 0.1, sigma: -0.5 };
        let r_c = spec.kink_radius().unwrap();
        let phi = spec.field(2);
        let below = r_c * (1.0 - 1e-6);
        let above = r_c * (1.0 + 1e-6);
        assert!(0.1 * below.powf(-0.5) < below.powf(-3.0));
        assert!(0.1 * above.powf(-0.5) > above.powf(-3.0));
        assert_eq!(phi.eval(below), 0.1 * below.powf(-0.5));
        assert_eq!(phi.eval(above), above.powf(-3.0));
    }

    #[test]
    fn closed_form_derivatives_match_finite_differences() {
        let specs: Vec<(BarrierSpec, f64, f64)> = vec![
            (BarrierSpec::SubVarphi { m: 2.0, beta: 4.0 }, 0.05, 30.0),
            (BarrierSpec::FundamentalE { sigma: -0.7 }, 0.3, 30.0),
            (BarrierSpec::PsiSub { m: 2.0, beta: 3.5, c0: 3.0, eps: 0.01, sigma_p: -0.4 }, 0.3, 30.0),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for (spec, lo, hi) in specs {
            let f = spec.field(2);
            for _ in 0..50 {
                let r = rng.random_range(lo..hi);
                if (r - 1.0).abs() < 1e-3 {
                    continue; // stay off the bump support edge
                }
                let h = 1e-5 * r.max(1.0);
                let fd = (f.eval(r + h) - f.eval(r - h)) / (2.0 * h);
                let cd = f.derivative(r);
                assert!(
                    (fd - cd).abs() <= 1e-6 * (1.0 + cd.abs()) + 1e-4 * h,
                    "{spec:?} at r={r}: fd={fd} closed={cd}"
                );
            }
        }
    }

    #[test]
    fn bump_has_unit_mass() {
        for dim in [1, 2, 3] {
            assert_relative_eq!(bump_mass(dim), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn subsolution_certificate_linear_case() {
        let b = linear_bounds();
        let m = 4.0;
        let radii: Vec<f64> = vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 80.0]
            .into_iter()
            .map(|t| t * m)
            .collect();
        let beta = 2.0 + 2.0 * 0.75;
        let rep = verify_subsolution(&b, m, beta, &radii, &cfg()).unwrap();
        assert!(rep.constant("c_emp").unwrap() > 0.0, "{:?}", rep.constants);
        assert!(rep.constant("C_emp").unwrap().is_finite());
        // far-field sign: the record at 20M has positive margin vs 0
        let far = rep.records.iter().find(|r| (r.radius - 80.0 * 4.0 / 4.0).abs() < 1e-9);
        let far = far.unwrap_or_else(|| rep.records.last().unwrap());
        assert!(far.lhs > 0.0);
    }

    #[test]
    fn subsolution_constant_is_roughly_scale_free() {
        let b = linear_bounds();
        let beta = 3.5;
        let radii = |m: f64| -> Vec<f64> {
            vec![0.5, 1.0, 2.0, 4.0, 8.0, 20.0].into_iter().map(|t| t * m).collect()
        };
        let c4 = verify_subsolution(&b, 4.0, beta, &radii(4.0), &cfg())
            .unwrap()
            .constant("c_emp")
            .unwrap();
        let c8 = verify_subsolution(&b, 8.0, beta, &radii(8.0), &cfg())
            .unwrap()
            .constant("c_emp")
            .unwrap();
        assert!(c4 > 0.0 && c8 > 0.0);
        assert!((c4 - c8).abs() <= 0.25 * c4.max(c8), "c4={c4} c8={c8}");
    }

    #[test]
    fn corollary_certificate_and_small_m() {
        let b = linear_bounds();
        let beta = 3.5;
        let radii = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 40.0, 120.0];
        let rep = verify_corollary(&b, 8.0, beta, &radii, &cfg()).unwrap();
        assert!(rep.constant("c_emp").unwrap() > 0.0, "{:?}", rep.constants);

        // drift vanishes at the origin: the r=0 record equals M⁻φ(0)
        let at0 = &rep.records[0];
        assert_eq!(at0.radius, 0.0);
        let phi = BarrierSpec::SubVarphi { m: 8.0, beta }.field(2);
        let direct = extremal(&phi, &b, OpSign::Minus, 0.0, &cfg()).unwrap();
        assert_relative_eq!(at0.lhs, direct.value, max_relative = 1e-10);
    }

    #[test]
    fn reports_are_deterministic() {
        let b = linear_bounds();
        let radii = [2.0, 4.0, 8.0, 16.0];
        let a = verify_subsolution(&b, 4.0, 3.5, &radii, &cfg()).unwrap();
        let c = verify_subsolution(&b, 4.0, 3.5, &radii, &cfg()).unwrap();
        assert_eq!(a.to_csv(), c.to_csv());
    }

    #[test]
    fn psi_margins_approach_the_bump_corrected_core_as_eps_vanishes() {
        // With ε → 0 the certified quantity reduces to that of
        // (M + r²)^{-β/2} + C₀η alone.
        let b = linear_bounds();
        let (m, c0) = (4.0, 2.0);
        let beta = 2.0 + 1.5;
        let sigma_p = -0.45;
        let radii = [2.5, 4.0, 8.0];
        let small = BarrierSpec::PsiSub { m, beta, c0, eps: 1e-6, sigma_p }.field(2);
        let zero = BarrierSpec::PsiSub { m, beta, c0, eps: 0.0, sigma_p }.field(2);
        let two_s = 1.5;
        for &r in &radii {
            let vs = extremal(&small, &b, OpSign::Plus, r, &cfg()).unwrap();
            let vz = extremal(&zero, &b, OpSign::Plus, r, &cfg()).unwrap();
            let ls = vs.value + r / two_s * small.derivative(r);
            let lz = vz.value + r / two_s * zero.derivative(r);
            assert!(
                (ls - lz).abs() <= 1e-4 * (1.0 + lz.abs()),
                "r={r}: {ls} vs {lz}"
            );
        }
    }

    #[test]
    fn supersolution_theta_formula() {
        let b = linear_bounds();
        let sigma = -0.5; // linear case
        let beta = 2.0 + 0.5 * (2.0 * 0.75);
        let theta = (beta - 2.0) / (beta + sigma);
        let rep = verify_supersolution(&b, beta, 0.05, &[0.5, 1.0, 5.0, 9.0, 20.0], &cfg()).unwrap();
        assert_relative_eq!(rep.constant("theta").unwrap(), theta, epsilon = 2e-4);
    }
}
