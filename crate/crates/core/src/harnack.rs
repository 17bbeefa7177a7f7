//! Randomized Harnack-ratio experiments and level-set decay fits over
//! families of nonnegative solutions of
//! I(u) + m(x)|Du| + c(x)u = f on B₂ with prescribed data on B₃ \ B₂.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{RadialField, RadialFn, RadialGrid};
use crate::kernel::{EllipticityBounds, KernelSpec};
use crate::operator::{Drift, OperatorSpec, OpSign, ZeroOrder};
use crate::eigen::{solve_dirichlet, DomainSpec, SolveOptions};
use crate::special::{ball_volume, line_fit};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// One randomized problem: nonnegative exterior bump mixture on the annulus,
/// a bounded sign-changing zero-order coefficient, the sign-changing gradient
/// multiplier m(x) = M₁ sin(3r), and a nonpositive forcing with ‖f‖∞ ≤ 1.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemSample {
    pub index: usize,
    pub bumps: Vec<(f64, f64, f64)>, // (center, width, amplitude)
    pub c_amp: f64,
    pub c_freq: f64,
    pub c_phase: f64,
    pub f_amp: f64,
    pub f_freq: f64,
    pub f_phase: f64,
    pub m1: f64,
    pub m2: f64,
}

impl ProblemSample {
    pub fn exterior_value(&self, r: f64) -> f64 {
        self.bumps
            .iter()
            .map(|&(c, w, a)| a * (-(r - c) * (r - c) / (2.0 * w * w)).exp())
            .sum()
    }

    pub fn zero_order(&self, r: f64) -> f64 {
        self.c_amp * (self.c_freq * r + self.c_phase).sin()
    }

    pub fn forcing(&self, r: f64) -> f64 {
        -self.f_amp * 0.5 * (1.0 + (self.f_freq * r + self.f_phase).cos())
    }

    pub fn gradient_multiplier(&self, r: f64) -> f64 {
        self.m1 * (3.0 * r).sin()
    }
}

/// Deterministic pseudo-random family: identical seed, identical samples.
pub fn generate_family(seed: u64, count: usize, m1: f64, m2: f64) -> Result<Vec<ProblemSample>> {
    if count == 0 {
        return Err(Error::Precondition("sample count must be at least 1".to_string()));
    }
    if m1 < 0.0 || m2 < 0.0 {
        return Err(Error::Precondition("M1, M2 must be nonnegative".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for index in 0..count {
        let n_bumps = rng.random_range(1..=5usize);
        let bumps = (0..n_bumps)
            .map(|_| {
                (
                    rng.random_range(1.0..3.0),
                    rng.random_range(0.1..1.0),
                    rng.random_range(0.0..1.0),
                )
            })
            .collect();
        out.push(ProblemSample {
            index,
            bumps,
            c_amp: if m2 > 0.0 { rng.random_range(-m2..m2) } else { 0.0 },
            c_freq: rng.random_range(0.5..3.0),
            c_phase: rng.random_range(0.0..std::f64::consts::TAU),
            f_amp: rng.random_range(0.0..1.0),
            f_freq: rng.random_range(0.5..3.0),
            f_phase: rng.random_range(0.0..std::f64::consts::TAU),
            m1,
            m2,
        });
    }
    Ok(out)
}

/// sup over the inner region / (inf over the outer region + ‖f‖∞), the
/// quantity bounded by the Harnack constant. Inner region B_{1/2}, outer B₁.
pub fn harnack_ratio(u: &RadialField, f_norm: f64) -> Result<f64> {
    let nodes = u.grid().nodes();
    let mut sup_inner = f64::NEG_INFINITY;
    let mut inf_outer = f64::INFINITY;
    for (i, &r) in nodes.iter().enumerate() {
        let v = u.values()[i];
        if v < -1e-10 {
            return Err(Error::Precondition(format!("negative value {v} at r = {r}")));
        }
        if r <= 0.5 {
            sup_inner = sup_inner.max(v);
        }
        if r <= 1.0 {
            inf_outer = inf_outer.min(v);
        }
    }
    let denom = inf_outer.max(0.0) + f_norm;
    if denom == 0.0 {
        return Ok(if sup_inner <= 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(sup_inner.max(0.0) / denom)
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleOutcome {
    pub index: usize,
    pub sup: f64,
    pub inf: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnackReport {
    pub outcomes: Vec<SampleOutcome>,
    pub failures: Vec<(usize, String)>,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub count: usize,
    /// max ratio over the first half of the samples / max ratio over all.
    pub stability: f64,
    pub all_nonnegative: bool,
}

impl HarnackReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_id,sup,inf,ratio\n");
        for o in &self.outcomes {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                o.index, o.sup, o.inf, o.ratio
            ));
        }
        out
    }

    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "count": self.count,
            "max_ratio": self.max_ratio,
            "median_ratio": self.median_ratio,
            "stability": self.stability,
            "failures": self.failures.len(),
            "all_nonnegative": self.all_nonnegative,
        })
    }
}

/// Grid shared by all samples: B₃ with a breakpoint at the solve boundary 2.
pub fn harnack_grid(dim: usize) -> Result<RadialGrid> {
    RadialGrid::geometric(3.0, 1.2e-3, 1.03, dim)?.with_breakpoints(&[2.0])
}

/// Solve one sample's Dirichlet problem on B₂ with its exterior data.
pub fn solve_sample(
    sample: &ProblemSample,
    bounds: &EllipticityBounds,
    opts: &SolveOptions,
) -> Result<(RadialField, f64)> {
    bounds.require_gradient_subordination()?;
    let s = sample.clone();
    let grid = match &opts.grid {
        Some(g) => g.clone(),
        None => harnack_grid(bounds.dim)?,
    };
    let s_c = s.clone();
    let s_m = s.clone();
    let spec = OperatorSpec {
        kernel: KernelSpec::Extremal(*bounds),
        sign: OpSign::Minus,
        drift: if s.m1 > 0.0 {
            Drift::AbsGradient(Arc::new(move |r| s_m.gradient_multiplier(r)))
        } else {
            Drift::None
        },
        zero_order: if s.c_amp != 0.0 {
            ZeroOrder::Radial(Arc::new(move |r| s_c.zero_order(r)))
        } else {
            ZeroOrder::None
        },
        bilinear: None,
        gradient_bound: s.m1,
        zero_order_bound: s.m2,
    };
    let mut o = opts.clone();
    o.grid = Some(grid.clone());
    if s.c_amp != 0.0 {
        o.shift = Some(2.0 * s.c_amp.abs() + 1e-3);
    }
    // Solve -F(u) = -f, i.e. I(u) + g + cu = f; the forcing is nonpositive so
    // the right-hand side of the monotone solve is nonnegative.
    let s_f = s.clone();
    let rhs = crate::field::AnalyticField::new("neg_forcing", move |r| -s_f.forcing(r), |_| 0.0);
    let s_g = s.clone();
    let data = crate::field::AnalyticField::new("exterior", move |r| s_g.exterior_value(r), |_| 0.0);
    let u = solve_dirichlet(
        &spec,
        &rhs,
        &DomainSpec::Ball { radius: 2.0 },
        Some(&data),
        1e-9,
        &o,
    )?;
    let f_norm = grid
        .nodes()
        .iter()
        .filter(|&&r| r < 2.0)
        .map(|&r| s.forcing(r).abs())
        .fold(0.0f64, f64::max);
    Ok((u, f_norm))
}

/// Full randomized experiment; failures are tolerated below 10% of the
/// family, anything more is fatal.
pub fn run_harnack_experiment(
    bounds: &EllipticityBounds,
    m1: f64,
    m2: f64,
    count: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<HarnackReport> {
    let samples = generate_family(seed, count, m1, m2)?;
    let results: Vec<std::result::Result<SampleOutcome, (usize, String)>> = samples
        .par_iter()
        .map(|sample| {
            let run = || -> Result<SampleOutcome> {
                let (u, f_norm) = solve_sample(sample, bounds, opts)?;
                let nodes = u.grid().nodes();
                let mut sup = f64::NEG_INFINITY;
                let mut inf = f64::INFINITY;
                for (i, &r) in nodes.iter().enumerate() {
                    if r <= 0.5 {
                        sup = sup.max(u.values()[i]);
                    }
                    if r <= 1.0 {
                        inf = inf.min(u.values()[i]);
                    }
                }
                let ratio = harnack_ratio(&u, f_norm)?;
                Ok(SampleOutcome { index: sample.index, sup, inf, ratio })
            };
            run().map_err(|e| (sample.index, e.to_string()))
        })
        .collect();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(f) => failures.push(f),
        }
    }
    if failures.len() * 10 > count {
        return Err(Error::Convergence(format!(
            "{} of {} samples failed: {:?}",
            failures.len(),
            count,
            failures.first()
        )));
    }
    let all_nonnegative = outcomes.iter().all(|o| o.inf >= -1e-10 && o.sup >= -1e-10);
    let max_ratio = outcomes.iter().map(|o| o.ratio).fold(0.0f64, f64::max);
    let half = count.div_ceil(2);
    let max_half = outcomes
        .iter()
        .filter(|o| o.index < half)
        .map(|o| o.ratio)
        .fold(0.0f64, f64::max);
    let mut ratios: Vec<f64> = outcomes.iter().map(|o| o.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let median_ratio = if ratios.is_empty() { 0.0 } else { ratios[ratios.len() / 2] };
    Ok(HarnackReport {
        count,
        outcomes,
        failures,
        max_ratio,
        median_ratio,
        stability: if max_ratio > 0.0 { max_half / max_ratio } else { 1.0 },
        all_nonnegative,
    })
}

/// |{u > t} ∩ B_r| from the radial profile: scan node intervals, bisect the
/// level crossings, and sum shell volumes.
pub fn superlevel_measure(u: &dyn RadialFn, t: f64, r: f64, dim: usize) -> f64 {
    let n = 2048;
    let vn = ball_volume(dim);
    let h = r / n as f64;
    let mut total = 0.0;
    let mut seg_start: Option<f64> = None;
    let mut prev_r = 0.0;
    let mut prev_above = u.eval(1e-12) > t;
    if prev_above {
        seg_start = Some(0.0);
    }
    for i in 1..=n {
        let ri = i as f64 * h;
        let above = u.eval(ri) > t;
        if above != prev_above {
            // bisect the crossing
            let (mut a, mut b) = (prev_r, ri);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                if (u.eval(mid) > t) == prev_above {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let cross = 0.5 * (a + b);
            if prev_above {
                let start = seg_start.take().unwrap_or(0.0);
                total += vn * (cross.powi(dim as i32) - start.powi(dim as i32));
            } else {
                seg_start = Some(cross);
            }
            prev_above = above;
        }
        prev_r = ri;
    }
    if prev_above {
        let start = seg_start.unwrap_or(0.0);
        total += vn * (r.powi(dim as i32) - start.powi(dim as i32));
    }
    total
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSetFit {
    pub epsilon: f64,
    pub per_radius: Vec<(f64, f64, f64)>, // (r, slope, r²)
    pub u0: f64,
    pub c0: f64,
}

/// Fit the level-set decay exponent: slope of log(|{u>t}∩B_r| / r^N) against
/// -log t on the large-t branch of the lattice.
pub fn level_set_fit(
    u: &dyn RadialFn,
    u0: f64,
    c0: f64,
    radii: &[f64],
    levels: &[f64],
    dim: usize,
) -> Result<LevelSetFit> {
    if radii.is_empty() || levels.len() < 3 {
        return Err(Error::Precondition("need at least 1 radius and 3 levels".to_string()));
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let t_threshold = sorted[sorted.len() / 2];
    let mut per_radius = Vec::new();
    let mut slopes = Vec::new();
    for &r in radii {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &t in levels {
            if t < t_threshold {
                continue;
            }
            let m = superlevel_measure(u, t, r, dim);
            if m > 0.0 {
                xs.push(-t.ln());
                ys.push((m / r.powi(dim as i32)).ln());
            }
        }
        if xs.len() < 3 {
            continue;
        }
        let (slope, intercept) = line_fit(&xs, &ys);
        // R² of the fit
        let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
        let ss_tot: f64 = ys.iter().map(|y| (y - mean_y) * (y - mean_y)).sum();
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let e = y - (slope * x + intercept);
                e * e
            })
            .sum();
        let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
        per_radius.push((r, slope, r2));
        slopes.push((slope, xs.len()));
    }
    if slopes.is_empty() {
        return Err(Error::Domain(
            "insufficient range: level sets empty across the lattice".to_string(),
        ));
    }
    let wsum: f64 = slopes.iter().map(|&(_, n)| n as f64).sum();
    let epsilon = slopes.iter().map(|&(sl, n)| sl * n as f64).sum::<f64>() / wsum;
    Ok(LevelSetFit { epsilon, per_radius, u0, c0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{AnalyticField, TailModel};
    use approx::assert_relative_eq;

    #[test]
    fn family_is_deterministic() {
        let a = generate_family(42, 3, 1.0, 1.0).unwrap();
        let b = generate_family(42, 3, 1.0, 1.0).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = generate_family(43, 3, 1.0, 1.0).unwrap();
        assert_ne!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
    }

    #[test]
    fn empty_family_is_rejected() {
        assert!(generate_family(1, 0, 1.0, 1.0).is_err());
    }

    #[test]
    fn ratio_examples() {
        let grid = std::sync::Arc::new(RadialGrid::geometric(3.0, 0.01, 1.05, 2).unwrap());
        let one =
            RadialField::from_fn(grid.clone(), |_| 1.0, TailModel::ZeroOutside { cutoff: 3.0 })
                .unwrap();
        assert_relative_eq!(harnack_ratio(&one, 0.0).unwrap(), 1.0);
        let zero =
            RadialField::from_fn(grid, |_| 0.0, TailModel::ZeroOutside { cutoff: 3.0 }).unwrap();
        assert_eq!(harnack_ratio(&zero, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn level_set_exact_power_example() {
        // u = |x|^{-1} in N = 2 on B_1: |{u>t}∩B_1| = π·min(1/t,1)², so the
        // slope on the t > 1 branch is exactly 2.
        let u = AnalyticField::power(-1.0);
        let levels: Vec<f64> = (0..10).map(|i| 1.25f64.powi(i)).collect();
        let fit = level_set_fit(&u, 1.0, 0.0, &[1.0], &levels, 2).unwrap();
        assert_relative_eq!(fit.epsilon, 2.0, max_relative = 1e-5);
    }

    #[test]
    fn level_set_indicator_jump() {
        let grid = std::sync::Arc::new(RadialGrid::geometric(2.0, 0.01, 1.05, 2).unwrap());
        let one =
            RadialField::from_fn(grid, |_| 1.0, TailModel::ZeroOutside { cutoff: 2.0 }).unwrap();
        let below = superlevel_measure(&one, 0.5, 1.5, 2);
        let above = superlevel_measure(&one, 1.5, 1.5, 2);
        assert_relative_eq!(below, std::f64::consts::PI * 1.5 * 1.5, max_relative = 1e-9);
        assert_eq!(above, 0.0);
    }

    #[test]
    fn zero_amplitude_family_solves_to_zero() {
        let mut fam = generate_family(7, 1, 0.0, 0.0).unwrap();
        fam[0].bumps.iter_mut().for_each(|b| b.2 = 0.0);
        fam[0].f_amp = 0.0;
        let bounds = EllipticityBounds::new(1.0, 2.0, 0.75, 2).unwrap();
        let (u, f_norm) = solve_sample(&fam[0], &bounds, &SolveOptions::default()).unwrap();
        assert_eq!(f_norm, 0.0);
        assert!(u.values().iter().all(|&v| v.abs() < 1e-12));
        assert_eq!(harnack_ratio(&u, 0.0).unwrap(), 0.0);
    }
}

#[cfg(test)]
mod more_tests {
    use super::*;
    use crate::kernel::EllipticityBounds;

    #[test]
    fn constant_exterior_data_respects_maximum_principle() {
        // data ≡ 1 on the annulus, no forcing: u ≤ 1 inside and ratio ≥ 1.
        let sample = ProblemSample {
            index: 0,
            bumps: vec![(2.5, 1e6, 1.0)],
            c_amp: 0.0,
            c_freq: 1.0,
            c_phase: 0.0,
            f_amp: 0.0,
            f_freq: 1.0,
            f_phase: 0.0,
            m1: 0.0,
            m2: 0.0,
        };
        let bounds = EllipticityBounds::new(1.0, 2.0, 0.75, 2).unwrap();
        let (u, f_norm) = solve_sample(&sample, &bounds, &SolveOptions::default()).unwrap();
        assert_eq!(f_norm, 0.0);
        let max = u.values().iter().fold(0.0f64, |m, v| m.max(*v));
        assert!(max <= 1.0 + 1e-9, "max {max}");
        let ratio = harnack_ratio(&u, 0.0).unwrap();
        assert!(ratio >= 1.0 && ratio.is_finite(), "ratio {ratio}");
    }

    #[test]
    fn ratio_is_invariant_under_data_scaling() {
        // Positive 1-homogeneity of the solve map: scaling the exterior data
        // leaves the ratio unchanged (f = 0).
        let bounds = EllipticityBounds::new(1.0, 1.0, 0.75, 2).unwrap();
        let mut base = generate_family(5, 1, 1.0, 0.5).unwrap().pop().unwrap();
        base.f_amp = 0.0;
        let mut scaled = base.clone();
        for b in &mut scaled.bumps {
            b.2 *= 3.7;
        }
        let opts = SolveOptions::default();
        let (u1, _) = solve_sample(&base, &bounds, &opts).unwrap();
        let (u2, _) = solve_sample(&scaled, &bounds, &opts).unwrap();
        let r1 = harnack_ratio(&u1, 0.0).unwrap();
        let r2 = harnack_ratio(&u2, 0.0).unwrap();
        assert!((r1 - r2).abs() <= 1e-10 * r1.max(1.0), "{r1} vs {r2}");
    }

    #[test]
    fn level_set_fit_on_computed_eigenfunction() {
        use crate::eigen::{principal_eigenpair, DomainSpec, SolveOptions};
        use crate::operator::{OperatorSpec, OpSign};
        let kernel = crate::kernel::KernelSpec::fractional_laplacian(2, 0.75).unwrap();
        let spec = OperatorSpec::new(kernel, OpSign::Plus);
        let mut opts = SolveOptions::default();
        opts.grid =
            Some(crate::field::RadialGrid::geometric(2.0, 2e-3, 1.05, 2).unwrap());
        let pair =
            principal_eigenpair(&spec, &DomainSpec::Ball { radius: 2.0 }, 1e-7, &opts).unwrap();
        // One t-lattice shared by both radii, high enough that the level
        // sets are strictly inside the smaller ball.
        let lo = (pair.phi.eval(1.0) * 1.05).max(0.05);
        let levels: Vec<f64> = (0..12)
            .map(|i| (lo.ln() + (0.9f64 / lo).ln() * i as f64 / 11.0).exp())
            .collect();
        let fit = level_set_fit(&pair.phi, 1.0, 0.0, &[1.0, 2.0], &levels, 2).unwrap();
        assert!(fit.epsilon > 0.0, "eps {}", fit.epsilon);
        let slopes: Vec<f64> = fit.per_radius.iter().map(|&(_, sl, _)| sl).collect();
        assert_eq!(slopes.len(), 2);
        assert!(slopes.iter().all(|&sl| sl > 0.0));
        let ratio = slopes[0] / slopes[1];
        assert!((0.5..=2.0).contains(&ratio), "slopes {slopes:?}");
    }
}
