//! Admissible kernel class: symmetric kernels comparable to |y|^{-(N+2s)}
//! between two ellipticity constants, the extremal class over it, explicit
//! members, and finite Isaacs families.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::frac_laplacian_constant;

/// Ellipticity data (γ, Γ, s, N) describing the kernel class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityBounds {
    /// Lower ellipticity constant γ.
    pub gamma: f64,
    /// Upper ellipticity constant Γ.
    #[serde(rename = "Gamma")]
    pub gamma_up: f64,
    /// Order parameter, s ∈ (0,1); the operator order is 2s.
    pub s: f64,
    /// Ambient dimension.
    #[serde(rename = "N")]
    pub dim: usize,
}

impl EllipticityBounds {
    pub fn new(gamma: f64, gamma_up: f64, s: f64, dim: usize) -> Result<Self> {
        let b = Self { gamma, gamma_up, s, dim };
        let violations = b.violations();
        if violations.is_empty() {
            Ok(b)
        } else {
            Err(Error::Precondition(format!("invalid ellipticity bounds: {violations:?}")))
        }
    }

    /// Isotropic bounds γ = Γ = C_{N,s}, the fractional-Laplacian normalization.
    pub fn fractional_laplacian(dim: usize, s: f64) -> Result<Self> {
        if !(0.0 < s && s < 1.0) {
            return Err(Error::Precondition(format!("s = {s} outside (0,1)")));
        }
        let c = frac_laplacian_constant(dim, s);
        Self::new(c, c, s, dim)
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.gamma > 0.0) {
            v.push(Violation::new(format!("gamma = {} must be positive", self.gamma)));
        }
        if self.gamma > self.gamma_up {
            v.push(Violation::new(format!(
                "gamma > Gamma ({} > {})",
                self.gamma, self.gamma_up
            )));
        }
        if !self.gamma_up.is_finite() {
            v.push(Violation::new("Gamma must be finite".to_string()));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            v.push(Violation::new(format!("s = {} outside (0,1)", self.s)));
        }
        if self.dim < 1 {
            v.push(Violation::new("dimension must be at least 1".to_string()));
        }
        v
    }

    /// Gradient-dependent terms (drift, |Du|) are only meaningful for s > 1/2.
    pub fn require_gradient_subordination(&self) -> Result<()> {
        if self.s > 0.5 {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "s = {} must exceed 1/2 for gradient terms",
                self.s
            )))
        }
    }
}

/// Pointwise kernel multiplier a(y), given in the reduced radial coordinates
/// used throughout the crate: radius ρ = |y| and cosine of the polar angle of
/// y relative to the first axis (the evaluation axis). Symmetry a(y) = a(-y)
/// reads a(ρ, c) = a(ρ, -c).
#[derive(Clone)]
pub struct Multiplier {
    name: String,
    constant: Option<f64>,
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl Multiplier {
    pub fn constant(value: f64) -> Self {
        Self {
            name: format!("constant({value})"),
            constant: Some(value),
            f: Arc::new(move |_, _| value),
        }
    }

    pub fn from_fn(
        name: impl Into<String>,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), constant: None, f: Arc::new(f) }
    }

    #[inline]
    pub fn eval(&self, rho: f64, cos_polar: f64) -> f64 {
        (self.f)(rho, cos_polar)
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Multiplier({})", self.name)
    }
}

/// A single explicit kernel a(y)|y|^{-(N+2s)} with declared bounds.
#[derive(Debug, Clone)]
pub struct ExplicitKernel {
    pub bounds: EllipticityBounds,
    pub multiplier: Multiplier,
}

/// Finite Isaacs family: one inner list of kernels per inf-index.
#[derive(Debug, Clone)]
pub struct IsaacsFamily {
    pub rows: Vec<Vec<ExplicitKernel>>,
}

impl IsaacsFamily {
    pub fn new(rows: Vec<Vec<ExplicitKernel>>) -> Result<Self> {
        let fam = Self { rows };
        let v = fam.violations();
        if v.is_empty() {
            Ok(fam)
        } else {
            Err(Error::Precondition(format!("invalid Isaacs family: {v:?}")))
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.rows.is_empty() {
            v.push(Violation::new("Isaacs family has no rows".to_string()));
            return v;
        }
        let mut probe = None;
        for (i, row) in self.rows.iter().enumerate() {
            if row.is_empty() {
                v.push(Violation::new(format!("Isaacs row {i} is empty")));
            }
            for k in row {
                match probe {
                    None => probe = Some((k.bounds.s, k.bounds.dim)),
                    Some((s, n)) => {
                        if k.bounds.s != s || k.bounds.dim != n {
                            v.push(Violation::new(
                                "Isaacs members disagree on (s, N)".to_string(),
                            ));
                        }
                    }
                }
            }
        }
        v
    }

    pub fn order(&self) -> (f64, usize) {
        let b = self.rows[0][0].bounds;
        (b.s, b.dim)
    }
}

/// A membership-class description of the kernel part of an operator.
#[derive(Debug, Clone)]
pub enum KernelSpec {
    /// The full extremal class over the given bounds (for M±).
    Extremal(EllipticityBounds),
    /// The normalized fractional Laplacian: a ≡ C_{N,s}.
    FractionalLaplacian(EllipticityBounds),
    /// One explicit kernel.
    Explicit(ExplicitKernel),
    /// Finite inf-sup family.
    Isaacs(IsaacsFamily),
}

impl KernelSpec {
    pub fn extremal(bounds: EllipticityBounds) -> Self {
        KernelSpec::Extremal(bounds)
    }

    pub fn fractional_laplacian(dim: usize, s: f64) -> Result<Self> {
        Ok(KernelSpec::FractionalLaplacian(EllipticityBounds::fractional_laplacian(dim, s)?))
    }

    pub fn explicit(bounds: EllipticityBounds, multiplier: Multiplier) -> Self {
        KernelSpec::Explicit(ExplicitKernel { bounds, multiplier })
    }

    pub fn bounds(&self) -> EllipticityBounds {
        match self {
            KernelSpec::Extremal(b) | KernelSpec::FractionalLaplacian(b) => *b,
            KernelSpec::Explicit(k) => k.bounds,
            KernelSpec::Isaacs(f) => f.rows[0][0].bounds,
        }
    }

    pub fn order(&self) -> (f64, usize) {
        let b = self.bounds();
        (b.s, b.dim)
    }

    /// Pointwise kernel value a(y)·|y|^{-(N+2s)} for specs that denote a
    /// single kernel. The extremal class and Isaacs families are sets of
    /// kernels, not pointwise ones.
    pub fn kernel_value(&self, y: &[f64]) -> Result<f64> {
        let (s, dim) = self.order();
        if y.len() != dim {
            return Err(Error::Precondition(format!(
                "point has dimension {}, kernel has {}",
                y.len(),
                dim
            )));
        }
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return Err(Error::Domain("kernel singularity at y = 0".to_string()));
        }
        let cos_polar = y[0] / r;
        let mag = r.powf(-(dim as f64 + 2.0 * s));
        match self {
            KernelSpec::FractionalLaplacian(b) => Ok(b.gamma * mag),
            KernelSpec::Explicit(k) => Ok(k.multiplier.eval(r, cos_polar) * mag),
            _ => Err(Error::Domain(
                "extremal/Isaacs specs denote kernel sets, not a pointwise kernel".to_string(),
            )),
        }
    }

    /// Checks all invariants; violations are data, not errors. Explicit
    /// multipliers are sampled on a fixed lattice of 64 directions × 32 radii.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = self.bounds().violations();
        match self {
            KernelSpec::Extremal(_) => {}
            KernelSpec::FractionalLaplacian(b) => {
                let c = frac_laplacian_constant(b.dim, b.s);
                if (b.gamma - c).abs() > 1e-12 * c || (b.gamma_up - c).abs() > 1e-12 * c {
                    v.push(Violation::new(format!(
                        "fractional-Laplacian bounds must equal C_(N,s) = {c}"
                    )));
                }
            }
            KernelSpec::Explicit(k) => v.extend(validate_multiplier(k)),
            KernelSpec::Isaacs(f) => {
                v.extend(f.violations());
                for row in &f.rows {
                    for k in row {
                        v.extend(validate_multiplier(k));
                    }
                }
            }
        }
        v
    }
}

fn validate_multiplier(k: &ExplicitKernel) -> Vec<Violation> {
    let mut v = Vec::new();
    let b = k.bounds;
    let dirs: Vec<f64> = if b.dim == 1 {
        vec![1.0, -1.0]
    } else {
        (0..64).map(|i| -1.0 + (2.0 * i as f64 + 1.0) / 64.0).collect()
    };
    let radii: Vec<f64> = (0..32)
        .map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 31.0))
        .collect();
    let mut bound_bad = false;
    let mut asym_bad = false;
    for &rho in &radii {
        for &c in &dirs {
            let a = k.multiplier.eval(rho, c);
            if !(b.gamma - 1e-12 <= a && a <= b.gamma_up + 1e-12) {
                bound_bad = true;
            }
            if (a - k.multiplier.eval(rho, -c)).abs() > 1e-12 * (1.0 + a.abs()) {
                asym_bad = true;
            }
        }
    }
    if bound_bad {
        v.push(Violation::new(format!(
            "bound exceeded: multiplier leaves [{}, {}] on the sample lattice",
            b.gamma, b.gamma_up
        )));
    }
    if asym_bad {
        v.push(Violation::new("asymmetry: a(y) != a(-y) on the sample lattice".to_string()));
    }
    v
}

/// One invariant violation, reported as data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub message: String,
}

impl Violation {
    fn new(message: String) -> Self {
        Self { message }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// JSON wire form of a kernel spec. Explicit multipliers round-trip only when
/// constant; arbitrary callables have no serial form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSpecRepr {
    variant: String,
    gamma: f64,
    #[serde(rename = "Gamma")]
    gamma_up: f64,
    s: f64,
    #[serde(rename = "N")]
    dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    multiplier: Option<f64>,
}

impl Serialize for KernelSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let b = self.bounds();
        let (variant, multiplier) = match self {
            KernelSpec::Extremal(_) => ("extremal", None),
            KernelSpec::FractionalLaplacian(_) => ("frac_laplacian", None),
            KernelSpec::Explicit(k) => ("explicit", k.multiplier.constant_value()),
            KernelSpec::Isaacs(_) => ("isaacs", None),
        };
        KernelSpecRepr {
            variant: variant.to_string(),
            gamma: b.gamma,
            gamma_up: b.gamma_up,
            s: b.s,
            dim: b.dim,
            multiplier,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let repr = KernelSpecRepr::deserialize(deserializer)?;
        // The fractional-Laplacian normalization is recomputed from (N, s);
        // its serialized gamma values are informational.
        if repr.variant == "frac_laplacian" {
            return Ok(KernelSpec::FractionalLaplacian(
                EllipticityBounds::fractional_laplacian(repr.dim, repr.s)
                    .map_err(|e| D::Error::custom(e.to_string()))?,
            ));
        }
        let bounds = EllipticityBounds::new(repr.gamma, repr.gamma_up, repr.s, repr.dim)
            .map_err(|e| D::Error::custom(e.to_string()))?;
        match repr.variant.as_str() {
            "extremal" => Ok(KernelSpec::Extremal(bounds)),
            "explicit" => {
                let value = repr.multiplier.ok_or_else(|| {
                    D::Error::custom("explicit kernels deserialize only with a constant multiplier")
                })?;
                Ok(KernelSpec::explicit(bounds, Multiplier::constant(value)))
            }
            "isaacs" => Err(D::Error::custom(
                "isaacs families have no JSON form; build them programmatically",
            )),
            other => Err(D::Error::custom(format!("unknown kernel variant `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_value_examples() {
        let b = EllipticityBounds::new(1.0, 1.0, 0.75, 1).unwrap();
        let k = KernelSpec::explicit(b, Multiplier::constant(1.0));
        // a ≡ 1, N=1, s=0.75, |y|=2 → 2^{-2.5}
        assert_relative_eq!(k.kernel_value(&[2.0]).unwrap(), 2f64.powf(-2.5), max_relative = 1e-14);
        assert_relative_eq!(k.kernel_value(&[1.0]).unwrap(), 1.0, max_relative = 1e-14);

        let fl = KernelSpec::fractional_laplacian(1, 0.5).unwrap();
        assert_relative_eq!(
            fl.kernel_value(&[1.0]).unwrap(),
            1.0 / std::f64::consts::PI,
            max_relative = 1e-12
        );
    }

    #[test]
    fn kernel_value_rejects_origin() {
        let fl = KernelSpec::fractional_laplacian(2, 0.75).unwrap();
        assert!(fl.kernel_value(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn validate_examples() {
        let ok = KernelSpec::extremal(EllipticityBounds { gamma: 1.0, gamma_up: 2.0, s: 0.75, dim: 2 });
        assert!(ok.validate().is_empty());

        let bad = KernelSpec::extremal(EllipticityBounds { gamma: 2.0, gamma_up: 1.0, s: 0.75, dim: 2 });
        let v = bad.validate();
        assert!(v.iter().any(|x| x.message.contains("gamma > Gamma")));

        // a = 3 on a half space, 1 elsewhere, bounds (1,2): bound + symmetry violations.
        let b = EllipticityBounds::new(1.0, 2.0, 0.75, 2).unwrap();
        let k = KernelSpec::explicit(
            b,
            Multiplier::from_fn("half_space_jump", |_, c| if c > 0.0 { 3.0 } else { 1.0 }),
        );
        let v = k.validate();
        assert!(v.iter().any(|x| x.message.contains("bound exceeded")));
        assert!(v.iter().any(|x| x.message.contains("asymmetry")));
    }

    #[test]
    fn bounds_and_symmetry_hold_for_validated_spec() {
        use rand::prelude::*;
        let b = EllipticityBounds::new(1.0, 2.0, 0.6, 2).unwrap();
        let k = KernelSpec::explicit(
            b,
            Multiplier::from_fn("angular", |_, c| 1.5 + 0.5 * (c * c * 2.0 - 1.0)),
        );
        assert!(k.validate().is_empty());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let exp = -(b.dim as f64 + 2.0 * b.s);
        for _ in 0..10_000 {
            let y = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let r2: f64 = y.iter().map(|v| v * v).sum();
            if r2 == 0.0 {
                continue;
            }
            let val = k.kernel_value(&y).unwrap();
            let mag = r2.sqrt().powf(exp);
            assert!(val >= b.gamma * mag - 1e-12 && val <= b.gamma_up * mag + 1e-12);
            let neg = [-y[0], -y[1]];
            assert_eq!(val, k.kernel_value(&neg).unwrap());
        }
    }

    #[test]
    fn frac_laplacian_has_equal_bounds() {
        let fl = KernelSpec::fractional_laplacian(2, 0.75).unwrap();
        let b = fl.bounds();
        assert_eq!(b.gamma, b.gamma_up);
        assert!(fl.validate().is_empty());
    }

    #[test]
    fn json_round_trip() {
        let spec = KernelSpec::extremal(EllipticityBounds { gamma: 1.0, gamma_up: 2.0, s: 0.75, dim: 2 });
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"variant\":\"extremal\""));
        let back: KernelSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.bounds(), spec.bounds());
    }
}
