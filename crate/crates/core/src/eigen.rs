//! Dirichlet and principal-eigenvalue solvers for the nonlocal operators on
//! radially symmetric domains.
//!
//! The discretization is collocation on the graded radial grid: each interior
//! node gets one quadrature lattice, the unknown enters through linear
//! interpolation, the near field through nodal second differences, and the
//! drift through one-sided second-order upwind stencils. Extremal and Isaacs
//! kernels are handled by policy iteration (freeze the pointwise selection,
//! assemble, solve, re-select); eigenpairs by shifted inverse power iteration
//! normalized at a fixed node.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{RadialField, RadialFn, RadialGrid, TailModel};
use crate::kernel::{IsaacsFamily, KernelSpec};
use crate::operator::{Drift, OperatorSpec, OpSign, ZeroOrder};
use crate::quad::{build_lattice, Far, Lattice, LatticeRequest, QuadratureConfig};

/// Radially symmetric computational domains.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DomainSpec {
    Ball { radius: f64 },
    Annulus { inner: f64, outer: f64 },
    /// B_R \ B_ε, an annulus with a small inner radius.
    PuncturedBall { eps: f64, radius: f64 },
    WholeSpace { radii: Vec<f64> },
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Ball { radius } if *radius > 0.0 => Ok(()),
            DomainSpec::Annulus { inner, outer } | DomainSpec::PuncturedBall { eps: inner, radius: outer }
                if *inner > 0.0 && outer > inner =>
            {
                Ok(())
            }
            DomainSpec::WholeSpace { radii }
                if radii.len() >= 3
                    && radii.windows(2).all(|w| w[1] > w[0])
                    && radii[0] > 0.0 =>
            {
                Ok(())
            }
            _ => Err(Error::Precondition(format!("invalid domain {self:?}"))),
        }
    }

    /// (inner, outer) radii of a bounded domain.
    pub fn interval(&self) -> Result<(f64, f64)> {
        match self {
            DomainSpec::Ball { radius } => Ok((0.0, *radius)),
            DomainSpec::Annulus { inner, outer } => Ok((*inner, *outer)),
            DomainSpec::PuncturedBall { eps, radius } => Ok((*eps, *radius)),
            DomainSpec::WholeSpace { .. } => {
                Err(Error::Precondition("whole space is not a bounded domain".to_string()))
            }
        }
    }
}

/// Initial iterate of the eigen iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StartProfile {
    Constant,
    GaussianBump,
    PowerDecay,
    /// Adversarial start with an interior sign change.
    SignChanging,
}

impl StartProfile {
    fn value(&self, r: f64, outer: f64, dim: usize, s: f64) -> f64 {
        match self {
            StartProfile::Constant => 1.0,
            StartProfile::GaussianBump => (-r * r).exp(),
            StartProfile::PowerDecay => {
                (1.0 + r * r).powf(-(dim as f64 + 2.0 * s) / 2.0)
            }
            StartProfile::SignChanging => 1.0 - 2.0 * r / outer,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub grid: Option<RadialGrid>,
    pub quad: QuadratureConfig,
    pub max_policy_sweeps: usize,
    pub max_power_iters: usize,
    pub start: StartProfile,
    /// Positive shift making a sign-changing zero-order term monotone.
    pub shift: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            grid: None,
            quad: QuadratureConfig::default(),
            max_policy_sweeps: 50,
            max_power_iters: 200,
            start: StartProfile::GaussianBump,
            shift: None,
        }
    }
}

/// Eigen solve output: eigenvalue, positive eigenfunction, normalization
/// point, and the collocation residual
/// max_i |full_operator(φ)_i + λ φ_i| / (1 + φ_i).
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    pub phi: RadialField,
    pub normalization_radius: f64,
    pub residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub radius: f64,
    pub lambda: f64,
    pub decay_exponent: Option<f64>,
}

/// Per-radius record of a domain exhaustion run.
#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionTrace {
    pub entries: Vec<TraceEntry>,
    pub lambda_last: f64,
    pub lambda_extrapolated: f64,
    pub monotone: bool,
}

impl ExhaustionTrace {
    /// Monotonicity slack: discretization tolerance per the continuum claim.
    pub fn slack(lambda: f64) -> f64 {
        1e-3 * (1.0 + lambda)
    }
}

/// Interior matrix, known-column couplings per row, and the policy digest.
type AssembledSystem = (DMatrix<f64>, Vec<Vec<(usize, f64)>>, u64);

enum KernelMode {
    Const(f64),
    Split { pos: f64, neg: f64 },
    Isaacs(IsaacsFamily),
}

/// Collocation discretization of -full_operator + shift on one grid.
struct Collocation {
    grid: Arc<RadialGrid>,
    interior: Vec<usize>,
    lattices: Vec<Lattice>,
    mode: KernelMode,
    drift: Drift,
    drift_coef: Vec<f64>,
    zero_order: Vec<f64>,
    shift: f64,
}

#[inline]
fn linear_weights(nodes: &[f64], r: f64) -> Option<(usize, f64)> {
    let n = nodes.len();
    if r > nodes[n - 1] {
        return None;
    }
    let k = (nodes.partition_point(|&x| x <= r)).clamp(1, n - 1) - 1;
    let t = (r - nodes[k]) / (nodes[k + 1] - nodes[k]);
    Some((k, t))
}

#[inline]
fn interp(nodes: &[f64], values: &[f64], r: f64) -> f64 {
    match linear_weights(nodes, r) {
        None => 0.0,
        Some((k, t)) => values[k] * (1.0 - t) + values[k + 1] * t,
    }
}

/// Nonuniform three-point second-difference weights at node i (even
/// reflection at the origin).
fn fd2_weights(nodes: &[f64], i: usize) -> Vec<(usize, f64)> {
    if i == 0 {
        let h = nodes[1];
        vec![(0, -2.0 / (h * h)), (1, 2.0 / (h * h))]
    } else {
        let hm = nodes[i] - nodes[i - 1];
        let hp = nodes[i + 1] - nodes[i];
        vec![
            (i - 1, 2.0 / (hm * (hm + hp))),
            (i, -2.0 / (hm * hp)),
            (i + 1, 2.0 / (hp * (hm + hp))),
        ]
    }
}

/// One-sided first-derivative weights of second order, pointing away from the
/// origin (sign > 0) or toward it (sign < 0); falls back to first order at
/// the stencil's end of range.
fn upwind_weights(nodes: &[f64], i: usize, outward: bool) -> Vec<(usize, f64)> {
    let n = nodes.len();
    if outward {
        if i + 2 < n {
            let h1 = nodes[i + 1] - nodes[i];
            let h2 = nodes[i + 2] - nodes[i + 1];
            vec![
                (i, -(2.0 * h1 + h2) / (h1 * (h1 + h2))),
                (i + 1, (h1 + h2) / (h1 * h2)),
                (i + 2, -h1 / (h2 * (h1 + h2))),
            ]
        } else if i + 1 < n {
            let h1 = nodes[i + 1] - nodes[i];
            vec![(i, -1.0 / h1), (i + 1, 1.0 / h1)]
        } else {
            vec![]
        }
    } else if i >= 2 {
        let h1 = nodes[i] - nodes[i - 1];
        let h2 = nodes[i - 1] - nodes[i - 2];
        vec![
            (i, (2.0 * h1 + h2) / (h1 * (h1 + h2))),
            (i - 1, -(h1 + h2) / (h1 * h2)),
            (i - 2, h1 / (h2 * (h1 + h2))),
        ]
    } else if i >= 1 {
        let h1 = nodes[i] - nodes[i - 1];
        vec![(i, 1.0 / h1), (i - 1, -1.0 / h1)]
    } else {
        vec![]
    }
}

impl Collocation {
    fn new(
        spec: &OperatorSpec,
        grid: Arc<RadialGrid>,
        interior: Vec<usize>,
        quad: &QuadratureConfig,
        shift: f64,
    ) -> Result<Self> {
        spec.validate()?;
        let (s, dim) = spec.kernel.order();
        if dim != grid.dim() {
            return Err(Error::Precondition(format!(
                "kernel dimension {dim} vs grid dimension {}",
                grid.dim()
            )));
        }
        let (mode, fold) = match &spec.kernel {
            KernelSpec::FractionalLaplacian(b) => (KernelMode::Const(b.gamma), None),
            KernelSpec::Explicit(k) => match k.multiplier.constant_value() {
                Some(c) => (KernelMode::Const(c), None),
                None => (KernelMode::Const(1.0), Some(&k.multiplier)),
            },
            KernelSpec::Extremal(b) => (
                match spec.sign {
                    OpSign::Plus => KernelMode::Split { pos: b.gamma_up, neg: b.gamma },
                    OpSign::Minus => KernelMode::Split { pos: b.gamma, neg: b.gamma_up },
                },
                None,
            ),
            KernelSpec::Isaacs(f) => (KernelMode::Isaacs(f.clone()), None),
        };
        if spec.bilinear.is_some() {
            return Err(Error::Precondition(
                "bilinear terms are not supported by the collocation solver".to_string(),
            ));
        }
        let mult_hi = spec.kernel.bounds().gamma_up;
        // Representative of the solution space: zero outside the grid.
        let shape = RadialField::new(
            grid.clone(),
            vec![1.0; grid.len()],
            TailModel::ZeroOutside { cutoff: grid.outer_radius() },
        )?;
        let nodes_list: Vec<Lattice> = interior
            .par_iter()
            .map(|&i| {
                build_lattice(&LatticeRequest {
                    field: &shape,
                    x_r: grid.nodes()[i],
                    dim,
                    s,
                    fold,
                    mult_hi,
                    sign_adaptive: false,
                    cfg: quad,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let drift_coef: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| match &spec.drift {
                Drift::None => 0.0,
                Drift::SelfSimilar => r / (2.0 * s),
                Drift::Radial(b) => b(r),
                Drift::AbsGradient(m) => m(r),
            })
            .collect();
        let zero_order: Vec<f64> =
            grid.nodes().iter().map(|&r| spec.zero_order.eval(r)).collect();
        Ok(Self {
            grid,
            interior,
            lattices: nodes_list,
            mode,
            drift: spec.drift.clone(),
            drift_coef,
            zero_order,
            shift,
        })
    }

    fn n(&self) -> usize {
        self.grid.len()
    }

    /// Assemble one F-row (the operator itself, before negation) for the
    /// interior node with lattice index `li`, freezing the selection from the
    /// current iterate. Returns a policy digest.
    fn f_row(&self, li: usize, cur: &[f64], row: &mut [f64]) -> u64 {
        row.iter_mut().for_each(|x| *x = 0.0);
        let lat = &self.lattices[li];
        let i_atom = self.interior[li];
        let nodes = self.grid.nodes();
        let u0 = cur[i_atom];
        let mut hash: u64 = 0xcbf29ce484222325;
        let mut mix = |bit: bool| {
            hash ^= bit as u64 + 0x9e37;
            hash = hash.wrapping_mul(0x100000001b3);
        };

        // Scalar Taylor coefficients of the current iterate for selection.
        let fd2 = fd2_weights(nodes, i_atom);
        let c_rad_cur: f64 = fd2.iter().map(|&(j, w)| w * cur[j]).sum();
        let h = lat.h_stencil;
        let r_i = nodes[i_atom];
        let r_perp = (r_i * r_i + h * h).sqrt();
        let perp: Vec<(usize, f64)> = match linear_weights(nodes, r_perp) {
            Some((k, t)) => vec![
                (k, 2.0 * (1.0 - t) / (h * h)),
                (k + 1, 2.0 * t / (h * h)),
                (i_atom, -2.0 / (h * h)),
            ],
            None => vec![(i_atom, -2.0 / (h * h))],
        };
        let c_tan_cur: f64 = perp.iter().map(|&(j, w)| w * cur[j]).sum();

        let member = match &self.mode {
            KernelMode::Isaacs(fam) => Some(self.select_member(lat, fam, cur, u0)),
            _ => None,
        };

        let mut s_rad = 0.0;
        let mut s_tan = 0.0;
        for node in &lat.nodes {
            if node.model {
                let c2 = node.z_cos * node.z_cos;
                let g = c_rad_cur * c2 + c_tan_cur * (1.0 - c2);
                let m = self.mult_for(g, node.z_r, node.z_cos, member, &mut mix);
                s_rad += node.w * m * node.z_r * node.z_r * c2;
                s_tan += node.w * m * node.z_r * node.z_r * (1.0 - c2);
            } else {
                let up = interp(nodes, cur, node.r_plus);
                let um = interp(nodes, cur, node.r_minus);
                let delta = up + um - 2.0 * u0;
                let m = self.mult_for(delta, node.z_r, node.z_cos, member, &mut mix);
                let wm = node.w * m;
                if let Some((k, t)) = linear_weights(nodes, node.r_plus) {
                    row[k] += wm * (1.0 - t);
                    row[k + 1] += wm * t;
                }
                if let Some((k, t)) = linear_weights(nodes, node.r_minus) {
                    row[k] += wm * (1.0 - t);
                    row[k + 1] += wm * t;
                }
                row[i_atom] -= 2.0 * wm;
            }
        }
        for &(j, w) in &fd2 {
            row[j] += s_rad * w;
        }
        for &(j, w) in &perp {
            row[j] += s_tan * w;
        }

        if let Far::ConstZero { geom } = lat.far {
            let m = self.mult_for(-2.0 * u0, 1.0, 1.0, member, &mut mix);
            row[i_atom] += geom * m * (-2.0);
        }

        // Drift term.
        let v = match &self.drift {
            Drift::None => 0.0,
            Drift::AbsGradient(_) => {
                let uw = upwind_weights(nodes, i_atom, true);
                let du: f64 = uw.iter().map(|&(j, w)| w * cur[j]).sum();
                let sgn = if du >= 0.0 { 1.0 } else { -1.0 };
                mix(du >= 0.0);
                self.drift_coef[i_atom] * sgn
            }
            _ => self.drift_coef[i_atom],
        };
        if v != 0.0 {
            for (j, w) in upwind_weights(nodes, i_atom, v > 0.0) {
                row[j] += v * w;
            }
        }

        // Zero-order term.
        row[i_atom] += self.zero_order[i_atom];
        hash
    }

    #[inline]
    fn mult_for(
        &self,
        delta: f64,
        z_r: f64,
        z_cos: f64,
        member: Option<(usize, usize)>,
        mix: &mut impl FnMut(bool),
    ) -> f64 {
        match &self.mode {
            KernelMode::Const(c) => *c,
            KernelMode::Split { pos, neg } => {
                let positive = delta >= 0.0;
                mix(positive);
                if positive {
                    *pos
                } else {
                    *neg
                }
            }
            KernelMode::Isaacs(fam) => {
                let (i, j) = member.expect("isaacs member selected");
                fam.rows[i][j].multiplier.eval(z_r, z_cos)
            }
        }
    }

    /// Frozen Isaacs selection: argmin over rows of argmax over members of
    /// the linear value on the current iterate.
    fn select_member(
        &self,
        lat: &Lattice,
        fam: &IsaacsFamily,
        cur: &[f64],
        u0: f64,
    ) -> (usize, usize) {
        let nodes = self.grid.nodes();
        let mut best: Option<(f64, (usize, usize))> = None;
        for (ri, rowk) in fam.rows.iter().enumerate() {
            let mut row_best: Option<(f64, usize)> = None;
            for (mi, member) in rowk.iter().enumerate() {
                let mut acc = 0.0;
                for node in &lat.nodes {
                    let delta = if node.model {
                        0.0
                    } else {
                        interp(nodes, cur, node.r_plus) + interp(nodes, cur, node.r_minus)
                            - 2.0 * u0
                    };
                    acc += node.w * member.multiplier.eval(node.z_r, node.z_cos) * delta;
                }
                if let Far::ConstZero { geom } = lat.far {
                    acc += geom * member.multiplier.eval(1.0, 1.0) * (-2.0 * u0);
                }
                if row_best.is_none_or(|(v, _)| acc > v) {
                    row_best = Some((acc, mi));
                }
            }
            let (v, mi) = row_best.expect("nonempty Isaacs row");
            if best.is_none_or(|(bv, _)| v < bv) {
                best = Some((v, (ri, mi)));
            }
        }
        best.expect("nonempty Isaacs family").1
    }

    /// Assemble A = -F + shift restricted to interior columns, and the
    /// boundary/exterior coupling A_known (interior × known).
    fn assemble(&self, cur: &[f64]) -> AssembledSystem {
        let n = self.n();
        let m = self.interior.len();
        let rows: Vec<(Vec<f64>, u64)> = (0..m)
            .into_par_iter()
            .map(|li| {
                let mut row = vec![0.0; n];
                let h = self.f_row(li, cur, &mut row);
                (row, h)
            })
            .collect();
        let mut is_interior = vec![usize::MAX; n];
        for (li, &i) in self.interior.iter().enumerate() {
            is_interior[i] = li;
        }
        let mut a = DMatrix::zeros(m, m);
        let mut known = vec![Vec::new(); m];
        let mut hash: u64 = 0xc0ffee;
        for (li, (row, h)) in rows.iter().enumerate() {
            hash = hash.wrapping_mul(31).wrapping_add(*h);
            for (j, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let lj = is_interior[j];
                if lj != usize::MAX {
                    a[(li, lj)] = -w;
                } else {
                    known[li].push((j, w));
                }
            }
            a[(li, li)] += self.shift;
        }
        (a, known, hash)
    }
}


/// Shared solve context: grid, interior set, normalization index.
struct Problem {
    grid: Arc<RadialGrid>,
    interior: Vec<usize>,
    norm_index: usize,
}

fn setup_problem(domain: &DomainSpec, spec: &OperatorSpec, opts: &SolveOptions) -> Result<Problem> {
    domain.validate()?;
    let (inner, outer) = domain.interval()?;
    let (_, dim) = spec.kernel.order();
    let grid = match &opts.grid {
        Some(g) => {
            // The grid must cover the domain; nodes beyond the boundary hold
            // prescribed exterior data.
            if g.outer_radius() < outer * (1.0 - 1e-12) {
                return Err(Error::Precondition(format!(
                    "grid outer radius {} smaller than the domain radius {outer}",
                    g.outer_radius()
                )));
            }
            Arc::new(g.clone())
        }
        None => {
            let base = RadialGrid::default_for_radius(outer, dim)?;
            let base = if inner > 0.0 { base.with_breakpoints(&[inner])? } else { base };
            Arc::new(base)
        }
    };
    let nodes = grid.nodes();
    let interior: Vec<usize> = (0..nodes.len())
        .filter(|&i| {
            let r = nodes[i];
            r < outer && (inner == 0.0 || r > inner)
        })
        .collect();
    if interior.len() < 8 {
        return Err(Error::Precondition("domain resolves to fewer than 8 interior nodes".to_string()));
    }
    // Normalization: the origin for balls, the midpoint node for annuli.
    let norm_index = if inner == 0.0 {
        0
    } else {
        let target = 0.5 * (inner + outer);
        *interior
            .iter()
            .min_by(|&&a, &&b| (nodes[a] - target).abs().total_cmp(&(nodes[b] - target).abs()))
            .unwrap()
    };
    if !interior.contains(&norm_index) {
        return Err(Error::Precondition("normalization node not interior".to_string()));
    }
    Ok(Problem { grid, interior, norm_index })
}

fn field_from_values(
    grid: &Arc<RadialGrid>,
    full: Vec<f64>,
) -> Result<RadialField> {
    RadialField::new(grid.clone(), full, TailModel::ZeroOutside { cutoff: grid.outer_radius() })
}

/// Collocation solve of -full_operator(u) = rhs on a bounded domain with
/// prescribed exterior values. Nonlinear kernels and |Du| drifts go through
/// policy iteration; a sign-changing zero-order coefficient requires a
/// positive shift in the options.
pub fn solve_dirichlet(
    spec: &OperatorSpec,
    rhs: &dyn RadialFn,
    domain: &DomainSpec,
    exterior: Option<&dyn RadialFn>,
    tol: f64,
    opts: &SolveOptions,
) -> Result<RadialField> {
    let problem = setup_problem(domain, spec, opts)?;
    let nodes = problem.grid.nodes().to_vec();
    let c_max = nodes.iter().map(|&r| spec.zero_order.eval(r)).fold(f64::NEG_INFINITY, f64::max);
    let shift = match (&spec.zero_order, opts.shift) {
        (ZeroOrder::None, _) => 0.0,
        (_, Some(m)) => m,
        (_, None) if c_max <= 0.0 => 0.0,
        _ => {
            return Err(Error::Precondition(
                "sign-changing zero-order coefficient needs a positive shift".to_string(),
            ))
        }
    };
    let coll = Collocation::new(spec, problem.grid.clone(), problem.interior.clone(), &opts.quad, shift)?;

    // Values at exterior nodes are data; interior starts at zero.
    let mut cur = vec![0.0; nodes.len()];
    if let Some(g) = exterior {
        let mut is_interior = vec![false; nodes.len()];
        for &i in &problem.interior {
            is_interior[i] = true;
        }
        for (i, &r) in nodes.iter().enumerate() {
            if !is_interior[i] {
                cur[i] = g.eval(r);
            }
        }
    }
    let rhs_values: Vec<f64> = problem.interior.iter().map(|&i| rhs.eval(nodes[i])).collect();

    let mut prev_hash = 0u64;
    let mut lu = None;
    let mut known_cols: Vec<Vec<(usize, f64)>> = Vec::new();
    for sweep in 0..opts.max_policy_sweeps {
        let (a, known, hash) = coll.assemble(&cur);
        let refreshed = hash != prev_hash || lu.is_none();
        if refreshed {
            lu = Some(a.lu());
            known_cols = known;
            prev_hash = hash;
        }
        let mut b = DVector::from_iterator(problem.interior.len(), rhs_values.iter().copied());
        for (li, cols) in known_cols.iter().enumerate() {
            for &(j, w) in cols {
                // A u = rhs means -F(u_int) - F(known) + shift u = rhs + shift u_prev
                b[li] += w * cur[j];
            }
            b[li] += shift * cur[problem.interior[li]];
        }
        let sol = lu
            .as_ref()
            .unwrap()
            .solve(&b)
            .ok_or_else(|| Error::Convergence("singular collocation matrix".to_string()))?;
        let mut change: f64 = 0.0;
        for (li, &i) in problem.interior.iter().enumerate() {
            change = change.max((sol[li] - cur[i]).abs() / (1.0 + sol[li].abs()));
            cur[i] = sol[li];
        }
        if change < tol.max(1e-14) && !refreshed {
            return field_from_values(&problem.grid, cur);
        }
        if change < tol.max(1e-14) && sweep + 1 < opts.max_policy_sweeps {
            // One more sweep to confirm the frozen policy is stable.
            continue;
        }
    }
    Err(Error::Convergence(format!(
        "policy iteration did not settle in {} sweeps",
        opts.max_policy_sweeps
    )))
}

/// Principal eigenpair on a bounded domain by shifted inverse power
/// iteration: solve (-F + m)v = u_k, read the eigenvalue from the
/// normalization factor, λ = 1/μ - m.
pub fn principal_eigenpair(
    spec: &OperatorSpec,
    domain: &DomainSpec,
    tol: f64,
    opts: &SolveOptions,
) -> Result<EigenPair> {
    if !spec.zero_order.is_none() {
        return Err(Error::Precondition(
            "eigen solves take a spec without zero-order term".to_string(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive".to_string()));
    }
    let problem = setup_problem(domain, spec, opts)?;
    let (s, dim) = spec.kernel.order();
    let mut warnings = Vec::new();
    if dim == 1 && !matches!(spec.kernel, KernelSpec::FractionalLaplacian(_) | KernelSpec::Explicit(_)) && !spec.drift.is_none()
    {
        warnings.push(
            "N = 1 with a nonlinear kernel lies outside the whole-space theory (N >= 2)".to_string(),
        );
    }
    let coll = Collocation::new(spec, problem.grid.clone(), problem.interior.clone(), &opts.quad, 0.0)?;
    let nodes = problem.grid.nodes();
    let outer = problem.grid.outer_radius();

    let mut cur = vec![0.0; nodes.len()];
    for &i in &problem.interior {
        cur[i] = opts.start.value(nodes[i], outer, dim, s);
    }
    let norm = cur[problem.norm_index];
    if norm == 0.0 {
        return Err(Error::Precondition("start profile vanishes at the normalization node".to_string()));
    }
    cur.iter_mut().for_each(|v| *v /= norm);

    let ni = problem.interior.iter().position(|&i| i == problem.norm_index).unwrap();
    let mut lambda = f64::NAN;
    let mut prev_hash = 0u64;
    let mut lu = None;
    let mut residual = f64::NAN;
    let mut converged = false;
    for _ in 0..opts.max_power_iters {
        let (a, _known, hash) = coll.assemble(&cur);
        if hash != prev_hash || lu.is_none() {
            lu = Some((a.clone().lu(), a));
            prev_hash = hash;
        }
        let (fact, amat) = lu.as_ref().unwrap();
        let b = DVector::from_iterator(
            problem.interior.len(),
            problem.interior.iter().map(|&i| cur[i]),
        );
        let v = fact
            .solve(&b)
            .ok_or_else(|| Error::Convergence("singular eigen iteration matrix".to_string()))?;
        let mu = v[ni];
        if !(mu.is_finite()) || mu == 0.0 {
            return Err(Error::Convergence("normalization factor degenerated".to_string()));
        }
        let lambda_new = 1.0 / mu;
        let mut change: f64 = 0.0;
        let mut min_val = f64::INFINITY;
        for (li, &i) in problem.interior.iter().enumerate() {
            let val = v[li] / mu;
            change = change.max((val - cur[i]).abs() / (1.0 + val.abs()));
            cur[i] = val;
            min_val = min_val.min(val);
        }
        if min_val <= 0.0 {
            return Err(Error::PositivityLost(format!(
                "iterate minimum {min_val} at lambda ~ {lambda_new}"
            )));
        }
        let settled = (lambda_new - lambda).abs() <= tol * (1.0 + lambda_new.abs())
            && change <= tol.max(1e-13) * 10.0;
        lambda = lambda_new;
        if settled {
            // Collocation residual |F(phi) + lambda phi| / (1 + phi).
            let phi = DVector::from_iterator(
                problem.interior.len(),
                problem.interior.iter().map(|&i| cur[i]),
            );
            let aphi = amat * &phi;
            residual = (0..phi.len())
                .map(|k| (lambda * phi[k] - aphi[k]).abs() / (1.0 + phi[k]))
                .fold(0.0, f64::max);
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence(format!(
            "inverse iteration did not converge in {} steps (lambda trace ends at {lambda})",
            opts.max_power_iters
        )));
    }
    // Exact normalization at the normalization node.
    let norm = cur[problem.norm_index];
    cur.iter_mut().for_each(|v| *v /= norm);
    let phi = field_from_values(&problem.grid, cur)?;
    Ok(EigenPair {
        lambda,
        phi,
        normalization_radius: nodes[problem.norm_index],
        residual,
        warnings,
    })
}

/// Grid used for the exhaustion balls: dense enough that the eigenvalue
/// discretization bias stays well under the exhaustion trend.
pub fn whole_space_grid(radius: f64, dim: usize) -> Result<RadialGrid> {
    RadialGrid::geometric(radius, (2.5e-4 * radius).max(1e-5), 1.015, dim)
}

/// Whole-space problem by exhaustion over growing balls with the self-similar
/// drift. The trace records per-ball eigenvalues and raw in-ball decay slopes
/// on [0.5, 0.8]·R_n; the extrapolated eigenvalue comes from the last three
/// balls.
///
/// Tail estimation: Dirichlet truncation injects a boundary mode
/// ~ R^{-(N+2s-2sλ)} r^{-2sλ} into each ball's eigenfunction, which dominates
/// the true r^{-(N+2s)} decay on any window scaling with R. The returned
/// field therefore carries a power law fitted to the mode-corrected
/// combination φ_last + κ(φ_last − φ_prev) with
/// κ = 1/((R_last/R_prev)^{N+2s-2sλ} − 1), on the window [0.3, 0.45]·R_last,
/// and is truncated at the window start.
pub fn whole_space_eigenpair(
    kernel: KernelSpec,
    sign: OpSign,
    radii: &[f64],
    tol: f64,
    opts: &SolveOptions,
) -> Result<(EigenPair, ExhaustionTrace)> {
    DomainSpec::WholeSpace { radii: radii.to_vec() }.validate()?;
    let bounds = kernel.bounds();
    bounds.require_gradient_subordination()?;
    let (s, dim) = kernel.order();
    let spec = OperatorSpec::new(kernel, sign).with_drift(Drift::SelfSimilar);
    let mut entries = Vec::new();
    let mut pairs: Vec<EigenPair> = Vec::new();
    let mut monotone = true;
    for &r_n in radii {
        let mut o = opts.clone();
        o.grid = Some(whole_space_grid(r_n, dim)?);
        let pair = principal_eigenpair(&spec, &DomainSpec::Ball { radius: r_n }, tol, &o)?;
        let decay = pair
            .phi
            .fit_tail(pair.phi.grid().window_indices(0.5 * r_n, 0.8 * r_n))
            .ok()
            .map(|t| match t {
                TailModel::PowerLaw { exponent, .. } => exponent,
                _ => f64::NAN,
            });
        if let Some(prev) = entries.last() {
            let prev: &TraceEntry = prev;
            if pair.lambda > prev.lambda + ExhaustionTrace::slack(pair.lambda) {
                monotone = false;
            }
        }
        entries.push(TraceEntry { radius: r_n, lambda: pair.lambda, decay_exponent: decay });
        pairs.push(pair);
    }
    let lambda_last = entries.last().unwrap().lambda;
    let k = entries.len();
    let lambda_extrapolated = {
        let (x0, x1, x2) =
            (entries[k - 3].lambda, entries[k - 2].lambda, entries[k - 1].lambda);
        let denom = (x2 - x1) - (x1 - x0);
        if denom.abs() > 1e-12 * (1.0 + x2.abs()) {
            let a = x2 - (x2 - x1) * (x2 - x1) / denom;
            // Guard against wild extrapolation when the sequence is noisy.
            if (a - x2).abs() < (x2 - x1).abs() * 4.0 + 1e-12 {
                a
            } else {
                x2
            }
        } else {
            x2
        }
    };

    // Mode-corrected tail from the two largest balls.
    let r_last = radii[k - 1];
    let r_prev = radii[k - 2];
    let last = &pairs[k - 1];
    let prev = &pairs[k - 2];
    let mode_q = dim as f64 + 2.0 * s - 2.0 * s * lambda_extrapolated;
    let (lo, hi) = (0.30 * r_last, 0.45 * r_last);
    let n_fit = 16;
    let mut lx = Vec::with_capacity(n_fit);
    let mut ly = Vec::with_capacity(n_fit);
    let kappa = if mode_q > 0.1 {
        1.0 / ((r_last / r_prev).powf(mode_q) - 1.0)
    } else {
        0.0
    };
    for i in 0..n_fit {
        let r = (lo.ln() + (hi / lo).ln() * i as f64 / (n_fit - 1) as f64).exp();
        let v_last = last.phi.eval(r);
        let v = v_last + kappa * (v_last - prev.phi.eval(r));
        if v > 0.0 {
            lx.push(r.ln());
            ly.push(v.ln());
        }
    }
    if lx.len() < 5 {
        return Err(Error::Convergence(
            "tail window has too few positive corrected values".to_string(),
        ));
    }
    let (slope, intercept) = crate::special::line_fit(&lx, &ly);
    let tail = TailModel::PowerLaw { amplitude: intercept.exp(), exponent: -slope };
    let phi = last.phi.truncated(lo, tail)?;
    let mut warnings = last.warnings.clone();
    if !monotone {
        warnings.push("exhaustion eigenvalues not decreasing within slack".to_string());
    }
    let trace = ExhaustionTrace { entries, lambda_last, lambda_extrapolated, monotone };
    Ok((
        EigenPair {
            lambda: lambda_extrapolated,
            phi,
            normalization_radius: last.normalization_radius,
            residual: last.residual,
            warnings,
        },
        trace,
    ))
}

/// Fitted decay of a whole-space eigenpair: the power law attached by the
/// exhaustion run (mode-corrected fit).
pub fn decay_exponent(pair: &EigenPair) -> Result<TailModel> {
    match pair.phi.tail() {
        t @ TailModel::PowerLaw { .. } => Ok(t),
        TailModel::ZeroOutside { .. } => Err(Error::Precondition(
            "pair has no fitted power-law tail (not a whole-space run?)".to_string(),
        )),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PuncturedEntry {
    pub eps: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PuncturedReport {
    pub entries: Vec<PuncturedEntry>,
    pub sigma: f64,
    pub lower_bound: f64,
    pub all_above_bound: bool,
    pub decreasing_in_eps: bool,
}

/// Eigenvalues of the drifted problem on punctured balls B_R \ B_ε, checked
/// against the fundamental-solution lower bound -σ/2s and for monotonicity in
/// ε.
pub fn punctured_eigenvalue(
    bounds: &crate::kernel::EllipticityBounds,
    sign: OpSign,
    eps_list: &[f64],
    radius: f64,
    slack: f64,
    tol: f64,
    opts: &SolveOptions,
) -> Result<PuncturedReport> {
    bounds.require_gradient_subordination()?;
    let sigma = crate::exponent::solve_sigma(bounds, sign, 1e-4, &opts.quad)?.sigma;
    let lower_bound = -sigma / (2.0 * bounds.s);
    let mut eps_sorted = eps_list.to_vec();
    eps_sorted.sort_by(|a, b| b.total_cmp(a)); // decreasing ε
    let spec = OperatorSpec::new(KernelSpec::Extremal(*bounds), sign).with_drift(Drift::SelfSimilar);
    let entries: Vec<PuncturedEntry> = eps_sorted
        .iter()
        .map(|&eps| {
            let pair = principal_eigenpair(
                &spec,
                &DomainSpec::PuncturedBall { eps, radius },
                tol,
                opts,
            )?;
            Ok(PuncturedEntry { eps, lambda: pair.lambda })
        })
        .collect::<Result<Vec<_>>>()?;
    let all_above_bound = entries.iter().all(|e| e.lambda >= lower_bound - slack);
    let decreasing_in_eps = entries
        .windows(2)
        .all(|w| w[1].lambda <= w[0].lambda + ExhaustionTrace::slack(w[0].lambda));
    Ok(PuncturedReport { entries, sigma, lower_bound, all_above_bound, decreasing_in_eps })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeOutcome {
    pub start: StartProfile,
    pub lambda: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub outcomes: Vec<ProbeOutcome>,
    pub max_pairwise_distance: f64,
    pub max_lambda_gap: f64,
}

/// Empirical simplicity probe: run the eigen iteration from several starts
/// and report the largest nodewise distance between the normalized
/// eigenfunctions and the largest eigenvalue gap.
pub fn simplicity_probe(
    spec: &OperatorSpec,
    domain: &DomainSpec,
    starts: &[StartProfile],
    tol: f64,
    opts: &SolveOptions,
) -> Result<ProbeReport> {
    if starts.len() < 2 {
        return Err(Error::Precondition("probe needs at least two starts".to_string()));
    }
    let mut fields: Vec<(StartProfile, EigenPair)> = Vec::new();
    let mut outcomes = Vec::new();
    for &start in starts {
        let mut o = opts.clone();
        o.start = start;
        match principal_eigenpair(spec, domain, tol, &o) {
            Ok(pair) => {
                outcomes.push(ProbeOutcome { start, lambda: Some(pair.lambda), error: None });
                fields.push((start, pair));
            }
            Err(e) => outcomes.push(ProbeOutcome { start, lambda: None, error: Some(e.to_string()) }),
        }
    }
    if fields.len() < 2 {
        return Err(Error::Convergence("fewer than two starts converged".to_string()));
    }
    let mut max_d: f64 = 0.0;
    let mut max_gap: f64 = 0.0;
    for a in 0..fields.len() {
        for b in a + 1..fields.len() {
            let (fa, fb) = (&fields[a].1, &fields[b].1);
            max_gap = max_gap.max((fa.lambda - fb.lambda).abs());
            let va = fa.phi.values();
            let vb = fb.phi.values();
            for k in 0..va.len().min(vb.len()) {
                let d = (va[k] - vb[k]).abs() / (1.0 + va[k].abs().max(vb[k].abs()));
                max_d = max_d.max(d);
            }
        }
    }
    Ok(ProbeReport { outcomes, max_pairwise_distance: max_d, max_lambda_gap: max_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;
    use crate::kernel::EllipticityBounds;
    use crate::operator::full_operator;
    use approx::assert_relative_eq;

    fn linear_kernel(dim: usize) -> KernelSpec {
        KernelSpec::fractional_laplacian(dim, 0.75).unwrap()
    }

    fn coarse(radius: f64, dim: usize) -> RadialGrid {
        RadialGrid::geometric(radius, radius * 1e-3, 1.05, dim).unwrap()
    }

    fn coarse_opts(radius: f64, dim: usize) -> SolveOptions {
        SolveOptions { grid: Some(coarse(radius, dim)), ..Default::default() }
    }

    #[test]
    fn zero_rhs_solves_to_zero() {
        let spec = OperatorSpec::new(linear_kernel(2), OpSign::Plus);
        let zero = AnalyticField::new("zero", |_| 0.0, |_| 0.0);
        let u = solve_dirichlet(
            &spec,
            &zero,
            &DomainSpec::Ball { radius: 1.0 },
            None,
            1e-12,
            &coarse_opts(1.0, 2),
        )
        .unwrap();
        assert!(u.values().iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn torsion_value_against_refined_solve() {
        // rhs ≡ 1 on B₁, N = 1, s = 0.75: u(0) against a 4x-resolution solve.
        let spec = OperatorSpec::new(linear_kernel(1), OpSign::Plus);
        let one = AnalyticField::new("one", |_| 1.0, |_| 0.0);
        let domain = DomainSpec::Ball { radius: 1.0 };
        let coarse_u =
            solve_dirichlet(&spec, &one, &domain, None, 1e-12, &coarse_opts(1.0, 1)).unwrap();
        let fine_opts = SolveOptions {
            grid: Some(RadialGrid::geometric(1.0, 2.5e-4, 1.0125, 1).unwrap()),
            ..Default::default()
        };
        let fine_u = solve_dirichlet(&spec, &one, &domain, None, 1e-12, &fine_opts).unwrap();
        assert_relative_eq!(coarse_u.eval(0.0), fine_u.eval(0.0), max_relative = 0.02);
    }

    #[test]
    fn comparison_principle_under_rhs_scaling() {
        let spec = OperatorSpec::new(linear_kernel(2), OpSign::Plus);
        let domain = DomainSpec::Ball { radius: 1.0 };
        let opts = coarse_opts(1.0, 2);
        let one = AnalyticField::new("one", |_| 1.0, |_| 0.0);
        let two = AnalyticField::new("two", |_| 2.0, |_| 0.0);
        let u1 = solve_dirichlet(&spec, &one, &domain, None, 1e-12, &opts).unwrap();
        let u2 = solve_dirichlet(&spec, &two, &domain, None, 1e-12, &opts).unwrap();
        for (a, b) in u1.values().iter().zip(u2.values()) {
            assert!(*b >= *a - 1e-12);
            assert_relative_eq!(*b, 2.0 * a, epsilon = 1e-10);
        }
    }

    #[test]
    fn eigen_scaling_identity_drift_free() {
        // λ(B₁) = 2^{2s} λ(B₂) up to discretization.
        let spec = OperatorSpec::new(linear_kernel(2), OpSign::Plus);
        let p1 =
            principal_eigenpair(&spec, &DomainSpec::Ball { radius: 1.0 }, 1e-7, &coarse_opts(1.0, 2))
                .unwrap();
        let p2 =
            principal_eigenpair(&spec, &DomainSpec::Ball { radius: 2.0 }, 1e-7, &coarse_opts(2.0, 2))
                .unwrap();
        assert_relative_eq!(p1.lambda, 2f64.powf(1.5) * p2.lambda, max_relative = 0.01);
    }

    #[test]
    fn small_ball_blowup() {
        let spec = OperatorSpec::new(linear_kernel(2), OpSign::Plus);
        let p1 =
            principal_eigenpair(&spec, &DomainSpec::Ball { radius: 1.0 }, 1e-7, &coarse_opts(1.0, 2))
                .unwrap();
        let p4 = principal_eigenpair(
            &spec,
            &DomainSpec::Ball { radius: 0.25 },
            1e-7,
            &coarse_opts(0.25, 2),
        )
        .unwrap();
        assert_relative_eq!(p4.lambda / p1.lambda, 4f64.powf(1.5), max_relative = 0.05);
    }

    #[test]
    fn pucci_eigenvalues_are_ordered() {
        // M⁺ ≥ M⁻ pointwise forces λ(M⁻ problem) ≥ λ(M⁺ problem).
        let b = EllipticityBounds::new(1.0, 2.0, 0.75, 2).unwrap();
        let minus = OperatorSpec::new(KernelSpec::Extremal(b), OpSign::Minus);
        let plus = OperatorSpec::new(KernelSpec::Extremal(b), OpSign::Plus);
        let lm = principal_eigenpair(&minus, &DomainSpec::Ball { radius: 1.0 }, 1e-7, &coarse_opts(1.0, 2))
            .unwrap()
            .lambda;
        let lp = principal_eigenpair(&plus, &DomainSpec::Ball { radius: 1.0 }, 1e-7, &coarse_opts(1.0, 2))
            .unwrap()
            .lambda;
        assert!(lm >= lp, "{lm} < {lp}");
    }

    #[test]
    fn eigen_output_invariants() {
        let spec = OperatorSpec::new(linear_kernel(2), OpSign::Plus);
        let tol = 1e-7;
        let pair =
            principal_eigenpair(&spec, &DomainSpec::Ball { radius: 1.0 }, tol, &coarse_opts(1.0, 2))
                .unwrap();
        // normalization φ(r*) = 1 exactly at the origin for balls
        assert_eq!(pair.normalization_radius, 0.0);
        assert_eq!(pair.phi.eval(0.0), 1.0);
        // positivity inside, exact zeros outside
        let nodes = pair.phi.grid().nodes();
        for (i, &r) in nodes.iter().enumerate() {
            if r < 1.0 {
                assert!(pair.phi.values()[i] > 0.0);
            } else {
                assert_eq!(pair.phi.values()[i], 0.0);
            }
        }
        // residual bound
        assert!(pair.residual < 10.0 * tol * (1.0 + pair.lambda), "{}", pair.residual);
    }

    #[test]
    fn characterization_with_submaximal_multiplier() {
        // For μ = 0.9 λ the computed φ satisfies F(φ) + μφ ≤ slack at
        // interior sample radii (φ is a valid test function for μ < λ).
        let spec = OperatorSpec::new(linear_kernel(2), OpSign::Plus);
        let pair =
            principal_eigenpair(&spec, &DomainSpec::Ball { radius: 1.0 }, 1e-8, &coarse_opts(1.0, 2))
                .unwrap();
        let mu = 0.9 * pair.lambda;
        let cfg = QuadratureConfig::default();
        for r in [0.2, 0.4, 0.6] {
            let v = full_operator(&pair.phi, &spec, r, &cfg).unwrap();
            let phi = pair.phi.eval(r);
            // -0.1 λ φ plus discretization wiggle
            assert!(
                v.value + mu * phi <= 2.0 * v.error_estimate + 0.05 * pair.lambda * phi,
                "r={r}: {} vs φ={phi}",
                v.value + mu * phi
            );
        }
    }

    #[test]
    fn domain_monotonicity() {
        let spec = OperatorSpec::new(linear_kernel(2), OpSign::Plus);
        let ball = principal_eigenpair(&spec, &DomainSpec::Ball { radius: 1.0 }, 1e-7, &coarse_opts(1.0, 2))
            .unwrap()
            .lambda;
        let smaller =
            principal_eigenpair(&spec, &DomainSpec::Ball { radius: 0.75 }, 1e-7, &coarse_opts(0.75, 2))
                .unwrap()
                .lambda;
        let annulus = principal_eigenpair(
            &spec,
            &DomainSpec::Annulus { inner: 0.3, outer: 1.0 },
            1e-7,
            &coarse_opts(1.0, 2),
        )
        .unwrap();
        assert!(smaller > ball);
        assert!(annulus.lambda > ball);
        // annulus normalization sits at the midpoint node
        assert!((annulus.normalization_radius - 0.65).abs() < 0.05);
    }

    #[test]
    fn simplicity_probe_on_linear_ball() {
        let spec = OperatorSpec::new(linear_kernel(2), OpSign::Plus);
        let tol = 1e-8;
        let probe = simplicity_probe(
            &spec,
            &DomainSpec::Ball { radius: 1.0 },
            &[StartProfile::Constant, StartProfile::GaussianBump, StartProfile::PowerDecay],
            tol,
            &coarse_opts(1.0, 2),
        )
        .unwrap();
        assert!(probe.max_pairwise_distance < 10.0 * 1e-6, "{}", probe.max_pairwise_distance);
        assert!(probe.max_lambda_gap < 1e-5);
    }

    #[test]
    fn adversarial_start_is_detected_or_converges() {
        let spec = OperatorSpec::new(linear_kernel(2), OpSign::Plus);
        let mut opts = coarse_opts(1.0, 2);
        opts.start = StartProfile::SignChanging;
        let reference =
            principal_eigenpair(&spec, &DomainSpec::Ball { radius: 1.0 }, 1e-7, &coarse_opts(1.0, 2))
                .unwrap();
        match principal_eigenpair(&spec, &DomainSpec::Ball { radius: 1.0 }, 1e-7, &opts) {
            Err(Error::PositivityLost(_)) => {}
            Ok(pair) => assert_relative_eq!(pair.lambda, reference.lambda, max_relative = 1e-4),
            Err(e) => panic!("unexpected error: {e}"),
        }
    }

    #[test]
    fn isaacs_single_member_matches_linear_eigenvalue() {
        let b = EllipticityBounds::new(1.3, 1.3, 0.75, 2).unwrap();
        let member = crate::kernel::ExplicitKernel {
            bounds: b,
            multiplier: crate::kernel::Multiplier::constant(1.3),
        };
        let family = crate::kernel::IsaacsFamily::new(vec![vec![member.clone()]]).unwrap();
        let spec_i = OperatorSpec::new(KernelSpec::Isaacs(family), OpSign::Plus);
        let spec_l = OperatorSpec::new(KernelSpec::Explicit(member), OpSign::Plus);
        let domain = DomainSpec::Ball { radius: 1.0 };
        let li = principal_eigenpair(&spec_i, &domain, 1e-7, &coarse_opts(1.0, 2)).unwrap().lambda;
        let ll = principal_eigenpair(&spec_l, &domain, 1e-7, &coarse_opts(1.0, 2)).unwrap().lambda;
        assert_relative_eq!(li, ll, max_relative = 1e-9);
    }

    #[test]
    fn nonmonotone_zero_order_requires_shift() {
        let spec = OperatorSpec::new(linear_kernel(2), OpSign::Plus)
            .with_zero_order(crate::operator::ZeroOrder::Constant(0.5));
        let one = AnalyticField::new("one", |_| 1.0, |_| 0.0);
        let err = solve_dirichlet(
            &spec,
            &one,
            &DomainSpec::Ball { radius: 1.0 },
            None,
            1e-10,
            &coarse_opts(1.0, 2),
        );
        assert!(matches!(err, Err(Error::Precondition(_))));
        let mut opts = coarse_opts(1.0, 2);
        opts.shift = Some(1.5);
        let u = solve_dirichlet(&spec, &one, &DomainSpec::Ball { radius: 1.0 }, None, 1e-10, &opts)
            .unwrap();
        assert!(u.values().iter().all(|v| v.is_finite()));
    }
}
