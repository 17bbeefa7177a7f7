//! Pointwise evaluation of the nonlocal operators: linear L_K, extremal M±,
//! finite Isaacs forms, full operators with drift and zero-order terms, and
//! the bilinear increment forms B_K, B±.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{AnalyticField, RadialFn};
use crate::kernel::{EllipticityBounds, IsaacsFamily, KernelSpec, Multiplier};
use crate::quad::{bilinear_integral, kernel_integral, ConsumePolicy, QuadratureConfig};
use crate::special::{gauss_on_interval, sphere_area};

/// Which extremal operator (sup or inf over the kernel class).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpSign {
    Plus,
    Minus,
}

impl OpSign {
    pub fn flipped(self) -> Self {
        match self {
            OpSign::Plus => OpSign::Minus,
            OpSign::Minus => OpSign::Plus,
        }
    }
}

/// Operator evaluation together with a two-level refinement error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorValue {
    pub value: f64,
    pub error_estimate: f64,
}

pub type RadialCoefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// First-order term of the full operator.
#[derive(Clone)]
pub enum Drift {
    None,
    /// b(x) = x/(2s), the self-similar drift.
    SelfSimilar,
    /// b(x)·Du for a radial vector field b(x) = b_r(|x|) x/|x|.
    Radial(RadialCoefficient),
    /// m(x)·|Du|, the Harnack-form gradient term.
    AbsGradient(RadialCoefficient),
}

impl Drift {
    pub fn is_none(&self) -> bool {
        matches!(self, Drift::None)
    }

    /// Scalar drift contribution given u'(r).
    pub fn apply(&self, s: f64, r: f64, du: f64) -> f64 {
        match self {
            Drift::None => 0.0,
            Drift::SelfSimilar => r / (2.0 * s) * du,
            Drift::Radial(b) => b(r) * du,
            Drift::AbsGradient(m) => m(r) * du.abs(),
        }
    }
}

impl std::fmt::Debug for Drift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Drift::None => write!(f, "Drift::None"),
            Drift::SelfSimilar => write!(f, "Drift::SelfSimilar"),
            Drift::Radial(_) => write!(f, "Drift::Radial(..)"),
            Drift::AbsGradient(_) => write!(f, "Drift::AbsGradient(..)"),
        }
    }
}

/// Zero-order coefficient c(x).
#[derive(Clone)]
pub enum ZeroOrder {
    None,
    Constant(f64),
    Radial(RadialCoefficient),
}

impl ZeroOrder {
    pub fn is_none(&self) -> bool {
        matches!(self, ZeroOrder::None)
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            ZeroOrder::None => 0.0,
            ZeroOrder::Constant(c) => *c,
            ZeroOrder::Radial(f) => f(r),
        }
    }
}

impl std::fmt::Debug for ZeroOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ZeroOrder::None => write!(f, "ZeroOrder::None"),
            ZeroOrder::Constant(c) => write!(f, "ZeroOrder::Constant({c})"),
            ZeroOrder::Radial(_) => write!(f, "ZeroOrder::Radial(..)"),
        }
    }
}

/// κ(x)·B±(u, ζ) term of the composite operator.
#[derive(Clone)]
pub struct BilinearTerm {
    pub kappa: RadialCoefficient,
    pub zeta: AnalyticField,
}

impl std::fmt::Debug for BilinearTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BilinearTerm(zeta = {})", self.zeta.label())
    }
}

/// Full operator description: kernel family, drift, zero-order coefficient,
/// optional bilinear-drift term, and the Harnack-form bounds M1, M2.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub kernel: KernelSpec,
    pub sign: OpSign,
    pub drift: Drift,
    pub zero_order: ZeroOrder,
    pub bilinear: Option<BilinearTerm>,
    pub gradient_bound: f64,
    pub zero_order_bound: f64,
}

impl OperatorSpec {
    pub fn new(kernel: KernelSpec, sign: OpSign) -> Self {
        Self {
            kernel,
            sign,
            drift: Drift::None,
            zero_order: ZeroOrder::None,
            bilinear: None,
            gradient_bound: 0.0,
            zero_order_bound: 0.0,
        }
    }

    pub fn with_drift(mut self, drift: Drift) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_zero_order(mut self, c: ZeroOrder) -> Self {
        self.zero_order = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bounds = self.kernel.bounds();
        let v = self.kernel.validate();
        if !v.is_empty() {
            return Err(Error::Precondition(format!("invalid kernel: {v:?}")));
        }
        if !self.drift.is_none() || self.bilinear.is_some() {
            bounds.require_gradient_subordination()?;
        }
        if self.gradient_bound < 0.0 || self.zero_order_bound < 0.0 {
            return Err(Error::Precondition("M1, M2 must be nonnegative".to_string()));
        }
        Ok(())
    }
}

/// Resolved single-kernel policy for the quadrature engine.
pub(crate) struct ResolvedKernel<'a> {
    pub fold: Option<&'a Multiplier>,
    pub pol: ConsumePolicy,
    pub mult_hi: f64,
    pub s: f64,
    pub dim: usize,
}

pub(crate) fn resolve_extremal(bounds: &EllipticityBounds, sign: OpSign) -> ResolvedKernel<'static> {
    // A collapsed class (γ = Γ) is a single kernel; evaluate it on the same
    // path as a linear operator so the equality is exact.
    let pol = if bounds.gamma == bounds.gamma_up {
        ConsumePolicy::Constant(bounds.gamma)
    } else {
        match sign {
            OpSign::Plus => ConsumePolicy::SignSplit { pos: bounds.gamma_up, neg: bounds.gamma },
            OpSign::Minus => ConsumePolicy::SignSplit { pos: bounds.gamma, neg: bounds.gamma_up },
        }
    };
    ResolvedKernel { fold: None, pol, mult_hi: bounds.gamma_up, s: bounds.s, dim: bounds.dim }
}

pub(crate) fn resolve_single(kernel: &KernelSpec) -> Result<ResolvedKernel<'_>> {
    let b = kernel.bounds();
    match kernel {
        KernelSpec::FractionalLaplacian(_) => Ok(ResolvedKernel {
            fold: None,
            pol: ConsumePolicy::Constant(b.gamma),
            mult_hi: b.gamma,
            s: b.s,
            dim: b.dim,
        }),
        KernelSpec::Explicit(k) => {
            if let Some(c) = k.multiplier.constant_value() {
                Ok(ResolvedKernel {
                    fold: None,
                    pol: ConsumePolicy::Constant(c),
                    mult_hi: c.abs(),
                    s: b.s,
                    dim: b.dim,
                })
            } else {
                Ok(ResolvedKernel {
                    fold: Some(&k.multiplier),
                    pol: ConsumePolicy::Constant(1.0),
                    mult_hi: b.gamma_up,
                    s: b.s,
                    dim: b.dim,
                })
            }
        }
        _ => Err(Error::Precondition(
            "linear evaluation needs a single kernel, not a class".to_string(),
        )),
    }
}

/// L_K u(x) for a single kernel (fractional Laplacian or explicit member).
pub fn linear_op(
    u: &dyn RadialFn,
    kernel: &KernelSpec,
    x_r: f64,
    cfg: &QuadratureConfig,
) -> Result<OperatorValue> {
    let rk = resolve_single(kernel)?;
    let (value, error_estimate) =
        kernel_integral(u, x_r, rk.dim, rk.s, rk.fold, &rk.pol, rk.mult_hi, false, cfg)?;
    Ok(OperatorValue { value, error_estimate })
}

/// Extremal operator M± via the pointwise sign split of the second
/// difference: M⁺ pairs Γ with the positive part and γ with the negative
/// part; M⁻ swaps them.
pub fn extremal(
    u: &dyn RadialFn,
    bounds: &EllipticityBounds,
    sign: OpSign,
    x_r: f64,
    cfg: &QuadratureConfig,
) -> Result<OperatorValue> {
    let violations = bounds.violations();
    if !violations.is_empty() {
        return Err(Error::Precondition(format!("invalid bounds: {violations:?}")));
    }
    let rk = resolve_extremal(bounds, sign);
    let adaptive = matches!(rk.pol, ConsumePolicy::SignSplit { .. });
    let (value, error_estimate) =
        kernel_integral(u, x_r, rk.dim, rk.s, rk.fold, &rk.pol, rk.mult_hi, adaptive, cfg)?;
    Ok(OperatorValue { value, error_estimate })
}

/// Finite Isaacs operator: min over rows of max over row members.
pub fn isaacs(
    u: &dyn RadialFn,
    family: &IsaacsFamily,
    x_r: f64,
    cfg: &QuadratureConfig,
) -> Result<OperatorValue> {
    let v = family.violations();
    if !v.is_empty() {
        return Err(Error::Precondition(format!("invalid Isaacs family: {v:?}")));
    }
    let mut best: Option<OperatorValue> = None;
    for row in &family.rows {
        let mut row_best: Option<OperatorValue> = None;
        for member in row {
            let spec = KernelSpec::Explicit(member.clone());
            let val = linear_op(u, &spec, x_r, cfg)?;
            row_best = Some(match row_best {
                None => val,
                Some(b) if val.value > b.value => val,
                Some(b) => b,
            });
        }
        let row_val = row_best.expect("nonempty row");
        best = Some(match best {
            None => row_val,
            Some(b) if row_val.value < b.value => row_val,
            Some(b) => b,
        });
    }
    Ok(best.expect("nonempty family"))
}

/// Kernel part of a full operator spec.
fn kernel_part(
    u: &dyn RadialFn,
    spec: &OperatorSpec,
    x_r: f64,
    cfg: &QuadratureConfig,
) -> Result<OperatorValue> {
    match &spec.kernel {
        KernelSpec::Extremal(b) => extremal(u, b, spec.sign, x_r, cfg),
        KernelSpec::Isaacs(f) => isaacs(u, f, x_r, cfg),
        k => linear_op(u, k, x_r, cfg),
    }
}

/// Full operator: kernel part + drift·Du + c(x)·u + optional κ·B±(u, ζ).
pub fn full_operator(
    u: &dyn RadialFn,
    spec: &OperatorSpec,
    x_r: f64,
    cfg: &QuadratureConfig,
) -> Result<OperatorValue> {
    spec.validate()?;
    let (s, _) = spec.kernel.order();
    let mut out = kernel_part(u, spec, x_r, cfg)?;
    if !spec.drift.is_none() {
        out.value += spec.drift.apply(s, x_r, u.derivative(x_r));
    }
    match &spec.zero_order {
        ZeroOrder::None => {}
        z => out.value += z.eval(x_r) * u.eval(x_r),
    }
    if let Some(term) = &spec.bilinear {
        let b = match &spec.kernel {
            KernelSpec::Extremal(bounds) | KernelSpec::FractionalLaplacian(bounds) => {
                extremal_bilinear(u, &term.zeta, bounds, spec.sign, x_r, cfg)?
            }
            KernelSpec::Explicit(k) => {
                bilinear(u, &term.zeta, &KernelSpec::Explicit(k.clone()), x_r, cfg)?
            }
            KernelSpec::Isaacs(f) => {
                let bounds = f.rows[0][0].bounds;
                extremal_bilinear(u, &term.zeta, &bounds, spec.sign, x_r, cfg)?
            }
        };
        let kappa = (term.kappa)(x_r);
        out.value += kappa * b.value;
        out.error_estimate += kappa.abs() * b.error_estimate;
    }
    Ok(out)
}

/// B_K(u, v)(x) = ½ ∫ (u(x)-u(y))(v(x)-v(y)) K(y-x) dy for a single kernel.
pub fn bilinear(
    u: &dyn RadialFn,
    v: &dyn RadialFn,
    kernel: &KernelSpec,
    x_r: f64,
    cfg: &QuadratureConfig,
) -> Result<OperatorValue> {
    let rk = resolve_single(kernel)?;
    let (value, error_estimate) =
        bilinear_integral(u, v, x_r, rk.dim, rk.s, rk.fold, &rk.pol, rk.mult_hi, cfg)?;
    Ok(OperatorValue { value, error_estimate })
}

/// Extremal bilinear forms: B⁺ realizes the sup over the class (Γ where the
/// increment product is positive, γ where negative); B⁻ is the inf, with the
/// choices reversed.
pub fn extremal_bilinear(
    u: &dyn RadialFn,
    v: &dyn RadialFn,
    bounds: &EllipticityBounds,
    sign: OpSign,
    x_r: f64,
    cfg: &QuadratureConfig,
) -> Result<OperatorValue> {
    let pol = match sign {
        OpSign::Plus => ConsumePolicy::SignSplit { pos: bounds.gamma_up, neg: bounds.gamma },
        OpSign::Minus => ConsumePolicy::SignSplit { pos: bounds.gamma, neg: bounds.gamma_up },
    };
    let (value, error_estimate) = bilinear_integral(
        u,
        v,
        x_r,
        bounds.dim,
        bounds.s,
        None,
        &pol,
        bounds.gamma_up,
        cfg,
    )?;
    Ok(OperatorValue { value, error_estimate })
}

/// ∫ u(y) (R+|y|)^{-(N+2s)} dy over R^N by radial quadrature.
pub fn weighted_l1_norm(
    u: &dyn RadialFn,
    s: f64,
    big_r: f64,
    dim: usize,
    cfg: &QuadratureConfig,
) -> Result<OperatorValue> {
    if !(big_r > 0.0) {
        return Err(Error::Precondition(format!("weight radius {big_r} must be positive")));
    }
    if let Some((_, sigma)) = u.power_behavior() {
        if sigma >= 2.0 * s {
            return Err(Error::Domain(format!(
                "integral of r^{sigma} against the weight diverges"
            )));
        }
        if sigma <= -(dim as f64) {
            return Err(Error::Domain(format!("r^{sigma} not integrable at the origin")));
        }
    }
    cfg.validate()?;
    let two_s = 2.0 * s;
    let sn = sphere_area(dim);
    let reach = u.zero_beyond();
    let eval_level = |cfg: &QuadratureConfig| -> (f64, f64) {
        let outer = reach.unwrap_or(cfg.outer_radius.max(100.0 * big_r));
        let mut panels = Vec::new();
        let mut edges = vec![0.0f64, big_r / 8.0, big_r, outer];
        edges.retain(|&e| e <= outer);
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * outer);
        for pair in edges.windows(2) {
            if pair[0] == 0.0 {
                panels.push((0.0, pair[1]));
            } else {
                let mut sub = Vec::new();
                crate::quad::fill_panels_pub(pair[0], pair[1], cfg.panels_per_decade, None, &mut sub);
                panels.extend(sub);
            }
        }
        let mut acc = 0.0;
        for (lo, hi) in panels {
            for (rho, w) in gauss_on_interval(12, lo, hi) {
                acc += w * u.eval(rho) * (big_r + rho).powf(-(dim as f64) - two_s)
                    * rho.powf(dim as f64 - 1.0);
            }
        }
        let rem = if reach.is_some() {
            0.0
        } else {
            u.abs_bound_beyond(outer) * sn * outer.powf(-two_s) / two_s
        };
        (sn * acc, rem)
    };
    let (v0, _) = eval_level(cfg);
    let (v1, rem) = eval_level(&cfg.refined());
    if !v1.is_finite() {
        return Err(Error::Domain("weighted integral diverged".to_string()));
    }
    Ok(OperatorValue { value: v1, error_estimate: (v1 - v0).abs() + rem + 1e-14 * (1.0 + v1.abs()) })
}


#[cfg(test)]
mod composite_tests {
    use super::*;
    use crate::field::AnalyticField;
    use approx::assert_relative_eq;

    #[test]
    fn composite_operator_adds_bilinear_term() {
        // M_B⁺ u = M⁺u + κ B⁺(u, ζ) + b·Du + c u assembled from the parts.
        let b = EllipticityBounds::new(1.0, 2.0, 0.75, 2).unwrap();
        let u = AnalyticField::new(
            "u",
            |r: f64| (-0.8 * r * r).exp(),
            |r: f64| -1.6 * r * (-0.8 * r * r).exp(),
        );
        let zeta = AnalyticField::new(
            "zeta",
            |r: f64| (1.0 + r * r).powf(-1.5),
            |r: f64| -3.0 * r * (1.0 + r * r).powf(-2.5),
        );
        let kappa = 0.4;
        let c0 = -0.2;
        let zeta2 = zeta.clone();
        let spec = OperatorSpec {
            kernel: KernelSpec::Extremal(b),
            sign: OpSign::Plus,
            drift: Drift::SelfSimilar,
            zero_order: ZeroOrder::Constant(c0),
            bilinear: Some(BilinearTerm { kappa: std::sync::Arc::new(move |_| kappa), zeta: zeta2 }),
            gradient_bound: 0.0,
            zero_order_bound: 0.2,
        };
        let cfg = QuadratureConfig::default();
        let x = 1.3;
        let full = full_operator(&u, &spec, x, &cfg).unwrap();
        let kernel_part = extremal(&u, &b, OpSign::Plus, x, &cfg).unwrap();
        let bform = extremal_bilinear(&u, &zeta, &b, OpSign::Plus, x, &cfg).unwrap();
        let manual = kernel_part.value
            + x / 1.5 * u.derivative(x)
            + c0 * u.eval(x)
            + kappa * bform.value;
        assert_relative_eq!(full.value, manual, max_relative = 1e-12);
    }
}
