//! Brute-force twin of the fast evaluator: dense shells with explicit PV
//! symmetrization, an independently coded near-field stub, and exact angular
//! trimming around the antipode for origin-singular fields. Slow by
//! construction; it shares nothing with the panel engine except the field
//! interface.

use crate::error::{Error, Result};
use crate::field::RadialFn;
use crate::kernel::{EllipticityBounds, KernelSpec, Multiplier};
use crate::operator::OpSign;
use crate::special::sphere_area;

use std::f64::consts::PI;

/// Multiplier rule mirrored from the fast path, re-stated independently.
enum Rule<'a> {
    Fixed(&'a Multiplier),
    Const(f64),
    Split { pos: f64, neg: f64 },
}

impl Rule<'_> {
    fn apply(&self, delta: f64, rho: f64, cos: f64) -> f64 {
        match self {
            Rule::Fixed(m) => m.eval(rho, cos) * delta,
            Rule::Const(c) => c * delta,
            Rule::Split { pos, neg } => {
                if delta >= 0.0 {
                    pos * delta
                } else {
                    neg * delta
                }
            }
        }
    }
}

const GAUSS2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Dense radial quadrature points: two-point Gauss per log-spaced shell, or
/// per linear shell when an absolute oscillation scale is given.
fn radial_points(lo: f64, hi: f64, shells: usize, linear_step: Option<f64>) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    if let Some(step) = linear_step {
        let n = ((hi - lo) / step).ceil() as usize;
        let d = (hi - lo) / n as f64;
        for i in 0..n {
            let mid = lo + (i as f64 + 0.5) * d;
            for q in GAUSS2 {
                pts.push((mid + q * d / 2.0, d / 2.0));
            }
        }
    } else {
        let (a, b) = (lo.ln(), hi.ln());
        let d = (b - a) / shells as f64;
        for i in 0..shells {
            let mid = a + (i as f64 + 0.5) * d;
            for q in GAUSS2 {
                let rho = (mid + q * d / 2.0).exp();
                pts.push((rho, rho * d / 2.0));
            }
        }
    }
    pts
}

/// Uniform-in-θ midpoint angular rule: (cosθ, θ, ω_{N-2} wθ sin^{N-2}θ).
fn angular_points(dim: usize, count: usize) -> Vec<(f64, f64, f64)> {
    if dim == 1 {
        return vec![(1.0, 0.0, 1.0)];
    }
    let omega = sphere_area(dim - 1);
    (0..count)
        .map(|i| {
            let th = PI * (i as f64 + 0.5) / count as f64;
            (th.cos(), th, omega * (PI / count as f64) * th.sin().powi(dim as i32 - 2))
        })
        .collect()
}

fn oracle_kernel(
    u: &dyn RadialFn,
    x_r: f64,
    dim: usize,
    s: f64,
    rule: &Rule,
    res_mult: usize,
) -> Result<f64> {
    let scale = x_r.max(1.0);
    let two_s = 2.0 * s;
    let u0 = u.eval(x_r);
    let n_shells = 260 * res_mult;
    let n_angles = 48 * res_mult;

    let singular = u.origin_exponent().is_some() && x_r > 0.0;
    if u.origin_exponent().is_some() && x_r == 0.0 {
        return Err(Error::Domain("oracle: singular origin".to_string()));
    }
    let hole = if singular { 0.25 * x_r } else { 0.0 };

    let outer = match u.zero_beyond() {
        Some(zb) => x_r + zb,
        None => match u.power_behavior() {
            Some((_, sigma)) if sigma >= two_s => {
                return Err(Error::Domain("oracle: non-integrable power tail".to_string()))
            }
            Some((_, sigma)) if sigma > -0.25 => 3e11 * scale,
            _ => {
                if u.panel_cap().is_some() {
                    2e3 * scale
                } else {
                    1e8 * scale
                }
            }
        },
    };
    let rho_min = 1e-6 * scale;
    let angles = angular_points(dim, n_angles);
    let radial = radial_points(rho_min, outer, n_shells, u.panel_cap().map(|c| 0.2 * c));

    let mut acc = 0.0;
    for &(rho, w_r) in &radial {
        let kmag = rho.powf(-1.0 - two_s);
        let in_band = singular && (rho - x_r).abs() < hole;
        if dim == 1 {
            if in_band {
                continue;
            }
            let delta = u.eval(x_r + rho) + u.eval((x_r - rho).abs()) - 2.0 * u0;
            acc += w_r * kmag * rule.apply(delta, rho, 1.0);
            continue;
        }
        let lim = if in_band {
            ((rho * rho + x_r * x_r - hole * hole) / (2.0 * x_r * rho)).clamp(-1.0, 1.0).acos()
        } else {
            0.0
        };
        for &(c, th, w_a) in &angles {
            if in_band && (th < lim || th > PI - lim) {
                continue;
            }
            let rp = (x_r * x_r + 2.0 * x_r * rho * c + rho * rho).sqrt();
            let rm = (x_r * x_r - 2.0 * x_r * rho * c + rho * rho).max(0.0).sqrt();
            let delta = u.eval(rp) + u.eval(rm) - 2.0 * u0;
            acc += 0.5 * w_a * w_r * kmag * rule.apply(delta, rho, c);
        }
    }

    // Near-field stub below rho_min from the quadratic model (independent
    // stencil h = 1e-3·scale).
    let h = 1e-3 * scale;
    let cr = (u.eval(x_r + h) - 2.0 * u0 + u.eval((x_r - h).abs())) / (h * h);
    let ct = if dim >= 2 { 2.0 * (u.eval((x_r * x_r + h * h).sqrt()) - u0) / (h * h) } else { 0.0 };
    let radial_stub = rho_min.powf(2.0 - two_s) / (2.0 - two_s);
    if dim == 1 {
        acc += radial_stub * rule.apply(cr, rho_min, 1.0);
    } else {
        for &(c, _, w_a) in &angles {
            let g = cr * c * c + ct * (1.0 - c * c);
            acc += 0.5 * w_a * radial_stub * rule.apply(g, rho_min, c);
        }
    }

    // Antipode balls B_hole(±x): equal by symmetry, so one unhalved copy.
    if singular {
        let taus = radial_points(1e-10 * hole, hole, n_shells, None);
        if dim == 1 {
            for &(tau, w_t) in &taus {
                for (z_r, r_plus) in [(x_r - tau, 2.0 * x_r - tau), (x_r + tau, 2.0 * x_r + tau)] {
                    let delta = u.eval(r_plus) + u.eval(tau) - 2.0 * u0;
                    acc += w_t * z_r.abs().powf(-1.0 - two_s) * rule.apply(delta, z_r.abs(), 1.0);
                }
            }
        } else {
            for &(tau, w_t) in &taus {
                let tmeas = tau.powf(dim as f64 - 1.0);
                for &(ca, _, w_a) in &angles {
                    let z_r = (x_r * x_r - 2.0 * x_r * tau * ca + tau * tau).sqrt();
                    let z_cos = ((x_r - tau * ca) / z_r).clamp(-1.0, 1.0);
                    let r_plus = (4.0 * x_r * x_r - 4.0 * x_r * tau * ca + tau * tau).sqrt();
                    let delta = u.eval(r_plus) + u.eval(tau) - 2.0 * u0;
                    acc += w_a * w_t * tmeas * z_r.powf(-(dim as f64) - two_s)
                        * rule.apply(delta, z_r, z_cos);
                }
            }
        }
    }

    Ok(acc)
}

/// Brute-force L_K u(x) for a single kernel.
pub fn linear_op(u: &dyn RadialFn, kernel: &KernelSpec, x_r: f64, res_mult: usize) -> Result<f64> {
    let (s, dim) = kernel.order();
    match kernel {
        KernelSpec::FractionalLaplacian(b) => {
            oracle_kernel(u, x_r, dim, s, &Rule::Const(b.gamma), res_mult)
        }
        KernelSpec::Explicit(k) => match k.multiplier.constant_value() {
            Some(c) => oracle_kernel(u, x_r, dim, s, &Rule::Const(c), res_mult),
            None => oracle_kernel(u, x_r, dim, s, &Rule::Fixed(&k.multiplier), res_mult),
        },
        _ => Err(Error::Precondition("oracle: single kernels only".to_string())),
    }
}

/// Brute-force extremal operator via the same pointwise sign decision.
pub fn extremal(
    u: &dyn RadialFn,
    bounds: &EllipticityBounds,
    sign: OpSign,
    x_r: f64,
    res_mult: usize,
) -> Result<f64> {
    let rule = match sign {
        OpSign::Plus => Rule::Split { pos: bounds.gamma_up, neg: bounds.gamma },
        OpSign::Minus => Rule::Split { pos: bounds.gamma, neg: bounds.gamma_up },
    };
    oracle_kernel(u, x_r, bounds.dim, bounds.s, &rule, res_mult)
}

/// Extremal value as a maximum over all band-wise constant multipliers
/// (2^bands kernels); equals the sign-split value when the second difference
/// has one sign per band. One-dimensional cross-check of the split formula.
pub fn extremal_banded_sup(
    u: &dyn RadialFn,
    bounds: &EllipticityBounds,
    band_edges: &[f64],
    x_r: f64,
    res_mult: usize,
) -> Result<f64> {
    if bounds.dim != 1 {
        return Err(Error::Precondition("banded oracle is one-dimensional".to_string()));
    }
    let n_bands = band_edges.len() + 1;
    if n_bands > 16 {
        return Err(Error::Precondition("too many bands".to_string()));
    }
    let mut best = f64::NEG_INFINITY;
    for mask in 0..(1usize << n_bands) {
        let edges = band_edges.to_vec();
        let (g, gu) = (bounds.gamma, bounds.gamma_up);
        let mult = Multiplier::from_fn("banded", move |rho: f64, _| {
            let band = edges.partition_point(|&e| e < rho);
            if mask >> band & 1 == 1 {
                gu
            } else {
                g
            }
        });
        let k = KernelSpec::explicit(*bounds, mult);
        let v = linear_op(u, &k, x_r, res_mult)?;
        best = best.max(v);
    }
    Ok(best)
}

/// Brute-force bilinear form B_K(u, v)(x).
pub fn bilinear(
    u: &dyn RadialFn,
    v: &dyn RadialFn,
    kernel: &KernelSpec,
    x_r: f64,
    res_mult: usize,
) -> Result<f64> {
    let (s, dim) = kernel.order();
    let rule = match kernel {
        KernelSpec::FractionalLaplacian(b) => Rule::Const(b.gamma),
        KernelSpec::Explicit(k) => match k.multiplier.constant_value() {
            Some(c) => Rule::Const(c),
            None => Rule::Fixed(&k.multiplier),
        },
        _ => return Err(Error::Precondition("oracle: single kernels only".to_string())),
    };
    let scale = x_r.max(1.0);
    let two_s = 2.0 * s;
    let u0 = u.eval(x_r);
    let v0 = v.eval(x_r);
    let outer = match (u.zero_beyond(), v.zero_beyond()) {
        (Some(a), Some(b)) => x_r + a.max(b),
        _ => 1e8 * scale,
    };
    let angles = angular_points(dim, 48 * res_mult);
    let radial = radial_points(1e-7 * scale, outer, 260 * res_mult, None);
    let mut acc = 0.0;
    for &(rho, w_r) in &radial {
        let kmag = rho.powf(-1.0 - two_s);
        if dim == 1 {
            for sgn in [1.0, -1.0] {
                let rp = (x_r + sgn * rho).abs();
                let prod = (u0 - u.eval(rp)) * (v0 - v.eval(rp));
                acc += 0.5 * w_r * kmag * rule.apply(prod, rho, sgn);
            }
        } else {
            for &(c, _, w_a) in &angles {
                let rp = (x_r * x_r + 2.0 * x_r * rho * c + rho * rho).sqrt();
                let prod = (u0 - u.eval(rp)) * (v0 - v.eval(rp));
                acc += 0.5 * w_a * w_r * kmag * rule.apply(prod, rho, c);
            }
        }
    }

    // Stub below rho_min from the increment-product model u'v'ρ²cos²θ, with
    // independent one-sided slopes at the origin.
    let h = 1e-3 * scale;
    let slope = |f: &dyn RadialFn| {
        if x_r < 1e-12 {
            (f.eval(h) - f.eval(0.0)) / h
        } else {
            (f.eval(x_r + h) - f.eval((x_r - h).abs())) / (2.0 * h)
        }
    };
    let rho_min = 1e-7 * scale;
    let coef = slope(u) * slope(v);
    let radial_stub = rho_min.powf(2.0 - two_s) / (2.0 - two_s);
    if dim == 1 {
        acc += radial_stub * rule.apply(coef, rho_min, 1.0);
    } else {
        for &(c, _, w_a) in &angles {
            acc += 0.5 * w_a * radial_stub * rule.apply(coef * c * c, rho_min, c);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;

    #[test]
    fn oracle_zero_on_constants() {
        let u = AnalyticField::new("one", |_| 1.0, |_| 0.0);
        let k = KernelSpec::fractional_laplacian(1, 0.75).unwrap();
        let v = linear_op(&u, &k, 0.7, 1).unwrap();
        assert!(v.abs() < 1e-12, "{v}");
    }
}
