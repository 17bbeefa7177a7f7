//! Radially symmetric scalar functions: a graded radial grid with
//! monotone-preserving cubic interpolation plus a far-field tail model, and
//! closed-form analytic fields.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::line_fit;

/// Strictly increasing radii r_0 = 0 < r_1 < ... < r_M.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    dim: usize,
}

/// Minimum node count demanded by the quadrature engine.
pub const MIN_GRID_NODES: usize = 17;

impl RadialGrid {
    pub fn new(nodes: Vec<f64>, dim: usize) -> Result<Self> {
        if nodes.len() < MIN_GRID_NODES {
            return Err(Error::Precondition(format!(
                "grid needs at least {MIN_GRID_NODES} nodes, got {}",
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::Precondition("first grid node must be exactly 0".to_string()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("grid nodes must be strictly increasing".to_string()));
        }
        if dim < 1 {
            return Err(Error::Precondition("dimension must be at least 1".to_string()));
        }
        Ok(Self { nodes, dim })
    }

    /// Geometric grid 0, h0, h0·q, ... capped to end exactly at r_max.
    pub fn geometric(r_max: f64, h0: f64, ratio: f64, dim: usize) -> Result<Self> {
        if !(r_max > h0 && h0 > 0.0 && ratio > 1.0) {
            return Err(Error::Precondition(format!(
                "bad geometric grid parameters (r_max={r_max}, h0={h0}, ratio={ratio})"
            )));
        }
        let mut nodes = vec![0.0];
        let mut r = h0;
        while r < r_max * (1.0 - 1e-12) {
            nodes.push(r);
            r *= ratio;
        }
        nodes.push(r_max);
        // Merge a too-short final cell into its neighbor.
        let m = nodes.len();
        if m >= 3 && nodes[m - 1] - nodes[m - 2] < 0.2 * (nodes[m - 2] - nodes[m - 3]) {
            nodes.remove(m - 2);
        }
        Self::new(nodes, dim)
    }

    /// Default solver grid for a ball of the given radius: ~220 nodes graded
    /// from the origin.
    pub fn default_for_radius(r_max: f64, dim: usize) -> Result<Self> {
        let h0 = (r_max * 5e-4).clamp(1e-5, 0.02);
        Self::geometric(r_max, h0, 1.035, dim)
    }

    /// Replace the node nearest to each breakpoint by the exact breakpoint.
    pub fn with_breakpoints(mut self, points: &[f64]) -> Result<Self> {
        for &p in points {
            if !(p > 0.0 && p <= *self.nodes.last().unwrap()) {
                return Err(Error::Precondition(format!("breakpoint {p} outside grid")));
            }
            let idx = self
                .nodes
                .iter()
                .enumerate()
                .skip(1)
                .min_by(|a, b| (a.1 - p).abs().total_cmp(&(b.1 - p).abs()))
                .map(|(i, _)| i)
                .unwrap();
            self.nodes[idx] = p;
        }
        self.nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        Self::new(self.nodes, self.dim)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn outer_radius(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Index of the cell [r_k, r_{k+1}] containing r (r <= outer radius).
    pub fn cell_of(&self, r: f64) -> usize {
        debug_assert!(r >= 0.0);
        let k = self.nodes.partition_point(|&x| x <= r);
        k.clamp(1, self.nodes.len() - 1) - 1
    }

    /// Node indices whose radii lie in [lo, hi].
    pub fn window_indices(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.nodes.partition_point(|&x| x < lo);
        let b = self.nodes.partition_point(|&x| x <= hi);
        a..b
    }
}

/// Far-field extension of a gridded field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailModel {
    /// Identically zero outside the cutoff radius.
    ZeroOutside { cutoff: f64 },
    /// A·r^{-p} beyond the last grid node.
    PowerLaw { amplitude: f64, exponent: f64 },
}

impl TailModel {
    fn violations(&self) -> Option<String> {
        match self {
            TailModel::ZeroOutside { cutoff } if !(*cutoff > 0.0) => {
                Some(format!("cutoff {cutoff} must be positive"))
            }
            TailModel::PowerLaw { amplitude, exponent } => {
                if !(*amplitude >= 0.0) {
                    Some(format!("amplitude {amplitude} must be nonnegative"))
                } else if !(*exponent > 0.0) {
                    Some(format!("tail exponent {exponent} must be positive"))
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// Anything that can be fed to the nonlocal evaluator.
pub trait RadialFn: Send + Sync {
    fn eval(&self, r: f64) -> f64;
    fn derivative(&self, r: f64) -> f64;

    /// Power exponent σ of a non-smooth origin (u ~ r^σ near 0 with σ < 0, or
    /// a kinked power with σ in (0,1)). Triggers the antipode treatment in the
    /// quadrature.
    fn origin_exponent(&self) -> Option<f64> {
        None
    }

    /// Set when the field is exactly A·r^σ on all of (0, ∞); allows closed
    /// far-field integration (needed for growing powers, σ ≥ 0).
    fn power_behavior(&self) -> Option<(f64, f64)> {
        None
    }

    /// Radius beyond which the field is identically zero, if any.
    fn zero_beyond(&self) -> Option<f64> {
        None
    }

    /// Cap on radial quadrature panel width (oscillatory fields).
    fn panel_cap(&self) -> Option<f64> {
        None
    }

    /// Radii where the field switches branch or loses smoothness; the
    /// quadrature aligns panel boundaries with the induced kink locations.
    fn structural_radii(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Crude upper bound for |u| on [r, ∞); feeds truncation error estimates.
    fn abs_bound_beyond(&self, r: f64) -> f64 {
        let mut m: f64 = 0.0;
        for f in [1.0, 2.0, 10.0, 100.0, 1e4] {
            m = m.max(self.eval(r * f).abs());
        }
        2.0 * m
    }
}

/// Gridded radial function with tail model and cached monotone-cubic slopes.
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    tail: TailModel,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>, tail: TailModel) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "{} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("field values must be finite".to_string()));
        }
        if let Some(msg) = tail.violations() {
            return Err(Error::Precondition(msg));
        }
        let slopes = monotone_cubic_slopes(grid.nodes(), &values);
        Ok(Self { grid, values, slopes, tail })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64, tail: TailModel) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values, tail)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> Arc<RadialGrid> {
        self.grid.clone()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    pub fn with_tail(mut self, tail: TailModel) -> Result<Self> {
        if let Some(msg) = tail.violations() {
            return Err(Error::Precondition(msg));
        }
        self.tail = tail;
        Ok(self)
    }

    /// Relative mismatch between the tail model and the last grid value;
    /// warning-level only (mid-iteration fields are not converged).
    pub fn tail_mismatch(&self) -> Option<f64> {
        let r = self.grid.outer_radius();
        let v = *self.values.last().unwrap();
        let t = match self.tail {
            TailModel::ZeroOutside { .. } => 0.0,
            TailModel::PowerLaw { amplitude, exponent } => amplitude * r.powf(-exponent),
        };
        let scale = v.abs().max(t.abs());
        if scale == 0.0 {
            return None;
        }
        let rel = (v - t).abs() / scale;
        (rel > 0.10).then_some(rel)
    }

    /// Least-squares power-law fit of the positive values over a node window.
    pub fn fit_tail(&self, window: std::ops::Range<usize>) -> Result<TailModel> {
        if window.end > self.grid.len() || window.len() < 5 {
            return Err(Error::Precondition(format!(
                "fit window {window:?} needs at least 5 in-grid nodes"
            )));
        }
        if window.start == 0 {
            return Err(Error::Precondition("fit window must exclude the origin".to_string()));
        }
        let rs = &self.grid.nodes()[window.clone()];
        let vs = &self.values[window];
        if vs.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("nonpositive values in fit window".to_string()));
        }
        let xs: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
        let ys: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
        let (slope, intercept) = line_fit(&xs, &ys);
        Ok(TailModel::PowerLaw { amplitude: intercept.exp(), exponent: -slope })
    }

    /// Drop nodes beyond `radius` and attach the given tail.
    pub fn truncated(&self, radius: f64, tail: TailModel) -> Result<Self> {
        let keep = self.grid.nodes().partition_point(|&r| r <= radius);
        let grid = RadialGrid::new(self.grid.nodes()[..keep].to_vec(), self.grid.dim())?;
        RadialField::new(Arc::new(grid), self.values[..keep].to_vec(), tail)
    }
}

impl RadialFn for RadialField {
    fn eval(&self, r: f64) -> f64 {
        let nodes = self.grid.nodes();
        let r_max = self.grid.outer_radius();
        if r > r_max {
            return match self.tail {
                TailModel::ZeroOutside { .. } => 0.0,
                TailModel::PowerLaw { amplitude, exponent } => amplitude * r.powf(-exponent),
            };
        }
        let k = self.grid.cell_of(r);
        if r == nodes[k] {
            return self.values[k];
        }
        let h = nodes[k + 1] - nodes[k];
        let t = (r - nodes[k]) / h;
        hermite(t, h, self.values[k], self.values[k + 1], self.slopes[k], self.slopes[k + 1]).0
    }

    fn derivative(&self, r: f64) -> f64 {
        let nodes = self.grid.nodes();
        if r > self.grid.outer_radius() {
            return match self.tail {
                TailModel::ZeroOutside { .. } => 0.0,
                TailModel::PowerLaw { amplitude, exponent } => {
                    -exponent * amplitude * r.powf(-exponent - 1.0)
                }
            };
        }
        if r == 0.0 {
            return 0.0;
        }
        let k = self.grid.cell_of(r);
        if r == nodes[k] {
            return self.slopes[k];
        }
        let h = nodes[k + 1] - nodes[k];
        let t = (r - nodes[k]) / h;
        hermite(t, h, self.values[k], self.values[k + 1], self.slopes[k], self.slopes[k + 1]).1
    }

    fn zero_beyond(&self) -> Option<f64> {
        match self.tail {
            TailModel::ZeroOutside { .. } => {
                // Tighten to the first node after which every value is zero.
                let mut idx = self.grid.len() - 1;
                while idx > 0 && self.values[idx] == 0.0 && self.values[idx - 1] == 0.0 {
                    idx -= 1;
                }
                Some(self.grid.nodes()[idx])
            }
            TailModel::PowerLaw { .. } => None,
        }
    }

    fn structural_radii(&self) -> Vec<f64> {
        vec![self.grid.outer_radius()]
    }

    fn abs_bound_beyond(&self, r: f64) -> f64 {
        match self.tail {
            TailModel::ZeroOutside { .. } => {
                if r >= self.grid.outer_radius() {
                    0.0
                } else {
                    self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
                }
            }
            TailModel::PowerLaw { amplitude, exponent } => {
                if r >= self.grid.outer_radius() {
                    amplitude * r.powf(-exponent)
                } else {
                    self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
                }
            }
        }
    }
}

/// Cubic Hermite value and derivative on a unit cell.
#[inline]
fn hermite(t: f64, h: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let value = y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + h * m0 * (t3 - 2.0 * t2 + t)
        + y1 * (-2.0 * t3 + 3.0 * t2)
        + h * m1 * (t3 - t2);
    let deriv = (y0 * (6.0 * t2 - 6.0 * t)
        + h * m0 * (3.0 * t2 - 4.0 * t + 1.0)
        + y1 * (-6.0 * t2 + 6.0 * t)
        + h * m1 * (3.0 * t2 - 2.0 * t))
        / h;
    (value, deriv)
}

/// Fritsch-Carlson slopes: no overshoot, monotone data stays monotone.
fn monotone_cubic_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut h = vec![0.0; n - 1];
    let mut d = vec![0.0; n - 1];
    for k in 0..n - 1 {
        h[k] = xs[k + 1] - xs[k];
        d[k] = (ys[k + 1] - ys[k]) / h[k];
    }
    let mut m = vec![0.0; n];
    m[0] = clip_endpoint(((2.0 * h[0] + h[1]) * d[0] - h[0] * d[1]) / (h[0] + h[1]), d[0]);
    m[n - 1] = clip_endpoint(
        ((2.0 * h[n - 2] + h[n - 3]) * d[n - 2] - h[n - 2] * d[n - 3]) / (h[n - 2] + h[n - 3]),
        d[n - 2],
    );
    for k in 1..n - 1 {
        if d[k - 1] * d[k] <= 0.0 {
            m[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    m
}

fn clip_endpoint(m: f64, d: f64) -> f64 {
    if m * d <= 0.0 {
        0.0
    } else if m.abs() > 3.0 * d.abs() {
        3.0 * d
    } else {
        m
    }
}

/// Closed-form radial function with declared derivative.
#[derive(Clone)]
pub struct AnalyticField {
    value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    deriv: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    origin_exponent: Option<f64>,
    power_behavior: Option<(f64, f64)>,
    zero_beyond: Option<f64>,
    panel_cap: Option<f64>,
    structural: Vec<f64>,
    label: String,
}

impl AnalyticField {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            deriv: Arc::new(deriv),
            origin_exponent: None,
            power_behavior: None,
            zero_beyond: None,
            panel_cap: None,
            structural: Vec::new(),
            label: label.into(),
        }
    }

    /// |x|^σ with its closed-form derivative. Singular set {0} for σ < 0.
    pub fn power(sigma: f64) -> Self {
        let mut f = Self::new(
            format!("|x|^{sigma}"),
            move |r: f64| r.powf(sigma),
            move |r: f64| sigma * r.powf(sigma - 1.0),
        );
        f.power_behavior = Some((1.0, sigma));
        if sigma < 0.0 || sigma.fract() != 0.0 {
            f.origin_exponent = Some(sigma);
        }
        f
    }

    pub fn with_origin_exponent(mut self, sigma: f64) -> Self {
        self.origin_exponent = Some(sigma);
        self
    }

    pub fn with_zero_beyond(mut self, radius: f64) -> Self {
        self.zero_beyond = Some(radius);
        self
    }

    pub fn with_panel_cap(mut self, cap: f64) -> Self {
        self.panel_cap = Some(cap);
        self
    }

    pub fn with_structural_radii(mut self, radii: Vec<f64>) -> Self {
        self.structural = radii;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl std::fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AnalyticField({})", self.label)
    }
}

impl RadialFn for AnalyticField {
    fn eval(&self, r: f64) -> f64 {
        (self.value)(r)
    }

    fn derivative(&self, r: f64) -> f64 {
        (self.deriv)(r)
    }

    fn origin_exponent(&self) -> Option<f64> {
        self.origin_exponent
    }

    fn power_behavior(&self) -> Option<(f64, f64)> {
        self.power_behavior
    }

    fn zero_beyond(&self) -> Option<f64> {
        self.zero_beyond
    }

    fn panel_cap(&self) -> Option<f64> {
        self.panel_cap
    }

    fn structural_radii(&self) -> Vec<f64> {
        self.structural.clone()
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    #[serde(rename = "N")]
    dim: usize,
    tail: TailRepr,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TailRepr {
    Power {
        #[serde(rename = "A")]
        amplitude: f64,
        p: f64,
    },
    Zero {
        cutoff: f64,
    },
}

impl RadialField {
    /// Writes `<base>.csv` (columns r,value; 17 significant digits) and the
    /// `<base>.json` sidecar. The decimal text round-trips bit-exactly.
    pub fn save(&self, base: &Path) -> Result<()> {
        let mut csv = String::from("r,value\n");
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            csv.push_str(&format!("{:.16e},{:.16e}\n", r, v));
        }
        std::fs::write(base.with_extension("csv"), csv)?;
        let tail = match self.tail {
            TailModel::PowerLaw { amplitude, exponent } => {
                TailRepr::Power { amplitude, p: exponent }
            }
            TailModel::ZeroOutside { cutoff } => TailRepr::Zero { cutoff },
        };
        let sidecar = Sidecar { dim: self.grid.dim(), tail };
        std::fs::write(base.with_extension("json"), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn load(base: &Path) -> Result<Self> {
        let csv = std::fs::read_to_string(base.with_extension("csv"))?;
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (i, line) in csv.lines().enumerate() {
            if i == 0 {
                if line.trim() != "r,value" {
                    return Err(Error::Invalid(format!("unexpected CSV header `{line}`")));
                }
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::Invalid(format!("bad CSV row `{line}`")))?;
            nodes.push(a.parse::<f64>().map_err(|e| Error::Invalid(e.to_string()))?);
            values.push(b.parse::<f64>().map_err(|e| Error::Invalid(e.to_string()))?);
        }
        let sidecar: Sidecar =
            serde_json::from_str(&std::fs::read_to_string(base.with_extension("json"))?)?;
        let tail = match sidecar.tail {
            TailRepr::Power { amplitude, p } => TailModel::PowerLaw { amplitude, exponent: p },
            TailRepr::Zero { cutoff } => TailModel::ZeroOutside { cutoff },
        };
        RadialField::new(Arc::new(RadialGrid::new(nodes, sidecar.dim)?), values, tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(r_max: f64) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::geometric(r_max, 0.01, 1.06, 2).unwrap())
    }

    #[test]
    fn eval_reproduces_node_values_exactly() {
        let g = grid(10.0);
        let f = RadialField::from_fn(g.clone(), |r| (1.0 + r * r).powf(-1.5), TailModel::ZeroOutside {
            cutoff: 10.0,
        })
        .unwrap();
        for (i, &r) in g.nodes().iter().enumerate() {
            assert_eq!(f.eval(r), f.values()[i]);
        }
    }

    #[test]
    fn constant_field_evals_and_derivative() {
        let g = grid(5.0);
        let f = RadialField::from_fn(g.clone(), |_| 1.0, TailModel::ZeroOutside { cutoff: 5.0 }).unwrap();
        let r3 = g.nodes()[3];
        assert_eq!(f.eval(r3), 1.0);
        assert_eq!(f.eval(0.37), 1.0);
        assert_eq!(f.derivative(0.37), 0.0);
        assert_eq!(f.eval(6.0), 0.0); // beyond the grid: zero tail
    }

    #[test]
    fn monotone_interpolation_does_not_overshoot() {
        let g = grid(4.0);
        let f = RadialField::from_fn(g.clone(), |r| (1.0 + r * r).powf(-2.0), TailModel::ZeroOutside {
            cutoff: 4.0,
        })
        .unwrap();
        let mut r = 0.0;
        while r < 4.0 {
            let v = f.eval(r);
            assert!(v > 0.0 && v <= 1.0, "overshoot at r={r}: {v}");
            r += 0.003;
        }
    }

    #[test]
    fn analytic_power_examples() {
        // φ_{1,3}(0) = (1 + 0)^{-3/2} = 1
        let phi = AnalyticField::new(
            "phi_{1,3}",
            |r| (1.0 + r * r).powf(-1.5),
            |r| -3.0 * r * (1.0 + r * r).powf(-2.5),
        );
        assert_eq!(phi.eval(0.0), 1.0);
        // E with σ = -0.5 at r = 4
        let e = AnalyticField::power(-0.5);
        assert_relative_eq!(e.eval(4.0), 0.5, max_relative = 1e-15);
        // |x|^σ, σ = -1: derivative at 2 is -1·2^{-2}
        let e1 = AnalyticField::power(-1.0);
        assert_relative_eq!(e1.derivative(2.0), -0.25, max_relative = 1e-15);
    }

    #[test]
    fn discretized_derivative_tracks_closed_form() {
        let g = Arc::new(RadialGrid::geometric(20.0, 0.005, 1.03, 2).unwrap());
        let f = RadialField::from_fn(g, |r| (1.0 + r * r).powf(-1.5), TailModel::PowerLaw {
            amplitude: 1.0,
            exponent: 3.0,
        })
        .unwrap();
        let exact = -3.0 * 2f64.powf(-2.5);
        assert_relative_eq!(f.derivative(1.0), exact, max_relative = 1e-3);
    }

    #[test]
    fn derivative_integrates_back_to_value_differences() {
        let g = Arc::new(RadialGrid::geometric(8.0, 0.005, 1.03, 2).unwrap());
        let f = RadialField::from_fn(g, |r| (-0.3 * r * r).exp(), TailModel::ZeroOutside {
            cutoff: 8.0,
        })
        .unwrap();
        // Trapezoid of f' over a fine mesh from 0.5 to 4.0.
        let n = 20_000;
        let (a, b) = (0.5, 4.0);
        let h = (b - a) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let r = a + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * f.derivative(r) * h;
        }
        let diff = f.eval(b) - f.eval(a);
        assert_relative_eq!(acc, diff, max_relative = 1e-4);
    }

    #[test]
    fn fit_tail_recovers_exact_power_law() {
        let g = Arc::new(RadialGrid::geometric(100.0, 0.01, 1.05, 2).unwrap());
        let f = RadialField::from_fn(g.clone(), |r| 2.0 * (r.max(1e-9)).powf(-3.5), TailModel::PowerLaw {
            amplitude: 2.0,
            exponent: 3.5,
        })
        .unwrap();
        let window = g.window_indices(10.0, 90.0);
        let fit = f.fit_tail(window).unwrap();
        match fit {
            TailModel::PowerLaw { amplitude, exponent } => {
                assert_relative_eq!(amplitude, 2.0, max_relative = 1e-6);
                assert_relative_eq!(exponent, 3.5, max_relative = 1e-6);
            }
            _ => panic!("expected power law"),
        }
    }

    #[test]
    fn fit_tail_on_perturbed_power_law() {
        let g = Arc::new(RadialGrid::geometric(120.0, 0.01, 1.03, 2).unwrap());
        let f = RadialField::from_fn(
            g.clone(),
            |r| {
                let r = r.max(1e-9);
                r.powf(-2.0) * (1.0 + 1.0 / r)
            },
            TailModel::PowerLaw { amplitude: 1.0, exponent: 2.0 },
        )
        .unwrap();
        let window = g.window_indices(50.0, 100.0);
        match f.fit_tail(window).unwrap() {
            TailModel::PowerLaw { exponent, .. } => {
                assert!((1.95..2.05).contains(&exponent), "exponent {exponent}");
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn fit_tail_of_constant_is_flat() {
        let g = grid(50.0);
        let f = RadialField::from_fn(g.clone(), |_| 3.0, TailModel::ZeroOutside { cutoff: 50.0 }).unwrap();
        let window = g.window_indices(5.0, 45.0);
        match f.fit_tail(window).unwrap() {
            TailModel::PowerLaw { exponent, .. } => assert!(exponent.abs() < 1e-10),
            _ => unreachable!(),
        }
    }

    #[test]
    fn fit_tail_rejects_nonpositive_window() {
        let g = grid(10.0);
        let f = RadialField::from_fn(g.clone(), |r| 1.0 - r, TailModel::ZeroOutside { cutoff: 10.0 })
            .unwrap();
        let window = g.window_indices(0.5, 9.0);
        assert!(f.fit_tail(window).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("field");
        let g = grid(7.0);
        let f = RadialField::from_fn(g, |r| (1.0 + 0.77 * r * r).powf(-1.3), TailModel::PowerLaw {
            amplitude: 0.123456789123456789,
            exponent: 2.6,
        })
        .unwrap();
        f.save(&base).unwrap();
        let f2 = RadialField::load(&base).unwrap();
        assert_eq!(f.values(), f2.values());
        assert_eq!(f.grid().nodes(), f2.grid().nodes());
        assert_eq!(f.tail(), f2.tail());
        // Writing again produces identical bytes.
        let base2 = dir.path().join("field2");
        f2.save(&base2).unwrap();
        let a = std::fs::read(base.with_extension("csv")).unwrap();
        let b = std::fs::read(base2.with_extension("csv")).unwrap();
        assert_eq!(a, b);
    }
}
