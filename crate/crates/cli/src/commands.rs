//! The command registry: each batch operation lives behind the `Command`
//! trait, registered by name and selected at runtime from the JSON config.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use fraclab_core::barrier;
use fraclab_core::eigen::{self, DomainSpec, SolveOptions};
use fraclab_core::exponent;
use fraclab_core::field::{AnalyticField, RadialField, RadialGrid};
use fraclab_core::harnack;
use fraclab_core::heat;
use fraclab_core::kernel::EllipticityBounds;
use fraclab_core::operator::{Drift, OperatorSpec, OpSign};
use fraclab_core::{acceptance, KernelSpec, QuadratureConfig};

use crate::manifest::StepStatus;

#[derive(Debug)]
pub enum CliError {
    /// Malformed configuration: exit code 2.
    Usage(String),
    /// A module failed while computing: exit code 1.
    Computation(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Computation(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fraclab_core::Error> for CliError {
    fn from(e: fraclab_core::Error) -> Self {
        CliError::Computation(e.to_string())
    }
}

pub struct RunContext<'a> {
    pub raw: &'a serde_json::Value,
    pub out: &'a Path,
    pub verbose: bool,
    pub outputs: Vec<PathBuf>,
    pub steps: Vec<StepStatus>,
}

impl RunContext<'_> {
    fn parse<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        serde_json::from_value(self.raw.clone()).map_err(|e| CliError::Usage(e.to_string()))
    }

    fn step<T>(
        &mut self,
        name: &str,
        f: impl FnOnce() -> Result<T, CliError>,
    ) -> Result<T, CliError> {
        let start = Instant::now();
        if self.verbose {
            eprintln!("{}", serde_json::json!({"step": name, "status": "start"}));
        }
        let result = f();
        let seconds = start.elapsed().as_secs_f64();
        let status = if result.is_ok() { "ok" } else { "failed" };
        if self.verbose {
            eprintln!(
                "{}",
                serde_json::json!({"step": name, "status": status, "seconds": seconds})
            );
        }
        self.steps.push(StepStatus { name: name.to_string(), status: status.to_string(), seconds });
        result.map_err(|e| match e {
            CliError::Computation(m) => CliError::Computation(format!("step `{name}`: {m}")),
            other => other,
        })
    }

    fn emit_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::Computation(e.to_string()))?;
        self.outputs.push(path);
        Ok(())
    }

    fn emit_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Computation(e.to_string()))?;
        self.emit_text(name, &text)
    }

    fn emit_field(&mut self, base: &str, field: &RadialField) -> Result<(), CliError> {
        let path = self.out.join(base);
        field.save(&path).map_err(|e| CliError::Computation(e.to_string()))?;
        self.outputs.push(path.with_extension("csv"));
        self.outputs.push(path.with_extension("json"));
        Ok(())
    }
}

pub trait Command: Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn run(&self, ctx: &mut RunContext) -> Result<(), CliError>;
}

pub struct Registry {
    commands: Vec<Box<dyn Command>>,
}

impl Registry {
    pub fn builtin() -> Self {
        Registry {
            commands: vec![
                Box::new(ExponentCommand),
                Box::new(EigenCommand),
                Box::new(PuncturedCommand),
                Box::new(BarriersCommand),
                Box::new(HarnackCommand),
                Box::new(HeatCommand),
                Box::new(DirichletCommand),
                Box::new(AcceptanceCommand),
            ],
        }
    }

    pub fn find(&self, name: &str) -> Option<&dyn Command> {
        self.commands.iter().find(|c| c.name() == name).map(|c| c.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.commands.iter().map(|c| c.name()).collect()
    }

    pub fn describe(&self) -> String {
        self.commands
            .iter()
            .map(|c| format!("  {:<12} {}", c.name(), c.about()))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
enum SignArg {
    Plus,
    Minus,
}

impl From<SignArg> for OpSign {
    fn from(s: SignArg) -> OpSign {
        match s {
            SignArg::Plus => OpSign::Plus,
            SignArg::Minus => OpSign::Minus,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
enum DomainArg {
    Ball { radius: f64 },
    Annulus { inner: f64, outer: f64 },
    PuncturedBall { eps: f64, radius: f64 },
    WholeSpace { radii: Vec<f64> },
}

impl From<DomainArg> for DomainSpec {
    fn from(d: DomainArg) -> DomainSpec {
        match d {
            DomainArg::Ball { radius } => DomainSpec::Ball { radius },
            DomainArg::Annulus { inner, outer } => DomainSpec::Annulus { inner, outer },
            DomainArg::PuncturedBall { eps, radius } => DomainSpec::PuncturedBall { eps, radius },
            DomainArg::WholeSpace { radii } => DomainSpec::WholeSpace { radii },
        }
    }
}

fn solve_options(quad: Option<QuadratureConfig>) -> SolveOptions {
    SolveOptions { quad: quad.unwrap_or_default(), ..Default::default() }
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct ExponentConfig {
    command: String,
    #[serde(rename = "N")]
    dim: usize,
    s: f64,
    gamma: f64,
    #[serde(rename = "Gamma")]
    gamma_up: f64,
    sign: SignArg,
    tol: Option<f64>,
    quadrature: Option<QuadratureConfig>,
    seed: Option<u64>,
}

struct ExponentCommand;

impl Command for ExponentCommand {
    fn name(&self) -> &'static str {
        "exponent"
    }

    fn about(&self) -> &'static str {
        "fundamental-solution exponent sigma and dimension-like number Ntilde"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        let cfg: ExponentConfig = ctx.parse()?;
        let bounds = EllipticityBounds::new(cfg.gamma, cfg.gamma_up, cfg.s, cfg.dim)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let quad = cfg.quadrature.unwrap_or_default();
        let tol = cfg.tol.unwrap_or(1e-4);
        let exp = ctx.step("solve_sigma", || {
            Ok(exponent::solve_sigma(&bounds, cfg.sign.into(), tol, &quad)?)
        })?;
        ctx.emit_json(
            "exponent.json",
            &serde_json::json!({
                "sigma": exp.sigma,
                "Ntilde": exp.ntilde,
                "sign": format!("{:?}", exp.sign).to_lowercase(),
                "residual": exp.residual,
            }),
        )
    }
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct EigenConfig {
    command: String,
    kernel: KernelSpec,
    sign: Option<SignArg>,
    domain: DomainArg,
    drift: Option<String>,
    tol: Option<f64>,
    quadrature: Option<QuadratureConfig>,
    seed: Option<u64>,
}

struct EigenCommand;

impl Command for EigenCommand {
    fn name(&self) -> &'static str {
        "eigen"
    }

    fn about(&self) -> &'static str {
        "principal eigenpair on balls, annuli or the whole space by exhaustion"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        let cfg: EigenConfig = ctx.parse()?;
        let sign: OpSign = cfg.sign.unwrap_or(SignArg::Plus).into();
        let tol = cfg.tol.unwrap_or(1e-6);
        let opts = solve_options(cfg.quadrature);
        match DomainSpec::from(cfg.domain.clone()) {
            DomainSpec::WholeSpace { radii } => {
                let kernel = cfg.kernel.clone();
                let (pair, trace) = ctx.step("whole_space_eigenpair", || {
                    Ok(eigen::whole_space_eigenpair(kernel, sign, &radii, tol, &opts)?)
                })?;
                ctx.emit_field("phi", &pair.phi)?;
                ctx.emit_json(
                    "eigen.json",
                    &serde_json::json!({
                        "lambda": pair.lambda,
                        "domain": {"type": "whole_space", "radii": radii},
                        "residual": pair.residual,
                        "trace": trace.entries,
                        "lambda_last": trace.lambda_last,
                        "monotone": trace.monotone,
                        "warnings": pair.warnings,
                    }),
                )
            }
            domain => {
                let drift = match cfg.drift.as_deref() {
                    None | Some("none") => Drift::None,
                    Some("self_similar") => Drift::SelfSimilar,
                    Some(other) => {
                        return Err(CliError::Usage(format!(
                            "unknown drift `{other}` (expected `none` or `self_similar`)"
                        )))
                    }
                };
                let spec = OperatorSpec::new(cfg.kernel.clone(), sign).with_drift(drift);
                let pair = ctx.step("principal_eigenpair", || {
                    Ok(eigen::principal_eigenpair(&spec, &domain, tol, &opts)?)
                })?;
                ctx.emit_field("phi", &pair.phi)?;
                ctx.emit_json(
                    "eigen.json",
                    &serde_json::json!({
                        "lambda": pair.lambda,
                        "domain": domain,
                        "residual": pair.residual,
                        "trace": [],
                        "normalization_radius": pair.normalization_radius,
                        "warnings": pair.warnings,
                    }),
                )
            }
        }
    }
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct PuncturedConfig {
    command: String,
    #[serde(rename = "N")]
    dim: usize,
    s: f64,
    gamma: f64,
    #[serde(rename = "Gamma")]
    gamma_up: f64,
    sign: Option<SignArg>,
    eps: Vec<f64>,
    #[serde(rename = "R")]
    radius: f64,
    slack: Option<f64>,
    tol: Option<f64>,
    quadrature: Option<QuadratureConfig>,
    seed: Option<u64>,
}

struct PuncturedCommand;

impl Command for PuncturedCommand {
    fn name(&self) -> &'static str {
        "punctured"
    }

    fn about(&self) -> &'static str {
        "drifted eigenvalues on punctured balls against the -sigma/2s bound"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        let cfg: PuncturedConfig = ctx.parse()?;
        let bounds = EllipticityBounds::new(cfg.gamma, cfg.gamma_up, cfg.s, cfg.dim)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let opts = solve_options(cfg.quadrature);
        let sign: OpSign = cfg.sign.unwrap_or(SignArg::Plus).into();
        let report = ctx.step("punctured_eigenvalue", || {
            Ok(eigen::punctured_eigenvalue(
                &bounds,
                sign,
                &cfg.eps,
                cfg.radius,
                cfg.slack.unwrap_or(0.02),
                cfg.tol.unwrap_or(1e-6),
                &opts,
            )?)
        })?;
        let mut csv = String::from("eps,lambda\n");
        for e in &report.entries {
            csv.push_str(&format!("{:.16e},{:.16e}\n", e.eps, e.lambda));
        }
        ctx.emit_text("punctured.csv", &csv)?;
        ctx.emit_json("punctured.json", &report)
    }
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct BarriersConfig {
    command: String,
    #[serde(rename = "N")]
    dim: usize,
    s: f64,
    gamma: f64,
    #[serde(rename = "Gamma")]
    gamma_up: f64,
    lemma: String,
    #[serde(rename = "M")]
    m: Option<f64>,
    beta: Option<f64>,
    c: Option<f64>,
    eps: Option<f64>,
    sigma_prime_offset: Option<f64>,
    radii: Option<Vec<f64>>,
    quadrature: Option<QuadratureConfig>,
    seed: Option<u64>,
}

struct BarriersCommand;

impl Command for BarriersCommand {
    fn name(&self) -> &'static str {
        "barriers"
    }

    fn about(&self) -> &'static str {
        "certificates for the closed-form sub/supersolution inequalities"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        let cfg: BarriersConfig = ctx.parse()?;
        let bounds = EllipticityBounds::new(cfg.gamma, cfg.gamma_up, cfg.s, cfg.dim)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let quad = cfg.quadrature.unwrap_or_default();
        let n = cfg.dim as f64;
        let beta_sub = cfg.beta.unwrap_or(n + 2.0 * cfg.s);
        let m = cfg.m.unwrap_or(4.0);
        let mut summaries = Vec::new();
        let which = cfg.lemma.as_str();
        let run_all = which == "all";
        if !run_all && !["subsolution", "corollary", "supersolution", "psi"].contains(&which) {
            return Err(CliError::Usage(format!(
                "unknown lemma `{which}` (expected subsolution|corollary|supersolution|psi|all)"
            )));
        }

        if run_all || which == "subsolution" {
            let radii = cfg
                .radii
                .clone()
                .unwrap_or_else(|| [0.5, 1.0, 2.0, 4.0, 8.0, 20.0].iter().map(|t| t * m).collect());
            let rep = ctx.step("verify_subsolution", || {
                Ok(barrier::verify_subsolution(&bounds, m, beta_sub, &radii, &quad)?)
            })?;
            ctx.emit_text("subsolution.csv", &rep.to_csv())?;
            summaries.push(rep.summary());
        }
        if run_all || which == "corollary" {
            let radii = cfg
                .radii
                .clone()
                .unwrap_or_else(|| [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 20.0].iter().map(|t| t * m).collect());
            let rep = ctx.step("verify_corollary", || {
                Ok(barrier::verify_corollary(&bounds, m, beta_sub, &radii, &quad)?)
            })?;
            ctx.emit_text("corollary.csv", &rep.to_csv())?;
            summaries.push(rep.summary());
        }
        if run_all || which == "supersolution" {
            let beta_super = cfg.beta.unwrap_or(n + cfg.s);
            let c = cfg.c.unwrap_or(0.05);
            let sigma = exponent::solve_sigma(&bounds, OpSign::Plus, 1e-5, &quad)?.sigma;
            let r_c = c.powf(-1.0 / (beta_super + sigma));
            let radii = cfg
                .radii
                .clone()
                .unwrap_or_else(|| [0.3, 0.5, 0.7, 1.2, 1.5, 2.0, 3.0].iter().map(|t| t * r_c).collect());
            let rep = ctx.step("verify_supersolution", || {
                Ok(barrier::verify_supersolution(&bounds, beta_super, c, &radii, &quad)?)
            })?;
            ctx.emit_text("supersolution.csv", &rep.to_csv())?;
            summaries.push(rep.summary());
        }
        if run_all || which == "psi" {
            let sigma = exponent::solve_sigma(&bounds, OpSign::Plus, 1e-5, &quad)?.sigma;
            let sigma_p = sigma + cfg.sigma_prime_offset.unwrap_or(0.05);
            let eps = cfg.eps.unwrap_or(1e-3);
            let radii =
                cfg.radii.clone().unwrap_or_else(|| vec![2.2, 3.0, 4.0, 6.0, 10.0, 16.0]);
            let cert = ctx.step("verify_psi", || {
                Ok(barrier::verify_psi(&bounds, m.max(1.0), eps, sigma_p, &radii, &quad)?)
            })?;
            ctx.emit_text("psi.csv", &cert.report.to_csv())?;
            summaries.push(cert.report.summary());
        }
        ctx.emit_json("barriers.json", &summaries)
    }
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct HarnackConfig {
    command: String,
    #[serde(rename = "N")]
    dim: Option<usize>,
    s: f64,
    gamma: f64,
    #[serde(rename = "Gamma")]
    gamma_up: f64,
    #[serde(rename = "M1")]
    m1: f64,
    #[serde(rename = "M2")]
    m2: f64,
    count: usize,
    seed: u64,
    quadrature: Option<QuadratureConfig>,
}

struct HarnackCommand;

impl Command for HarnackCommand {
    fn name(&self) -> &'static str {
        "harnack"
    }

    fn about(&self) -> &'static str {
        "randomized Harnack-ratio experiment over nonnegative solutions"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        let cfg: HarnackConfig = ctx.parse()?;
        let bounds =
            EllipticityBounds::new(cfg.gamma, cfg.gamma_up, cfg.s, cfg.dim.unwrap_or(2))
                .map_err(|e| CliError::Usage(e.to_string()))?;
        let opts = solve_options(cfg.quadrature);
        let report = ctx.step("run_harnack_experiment", || {
            Ok(harnack::run_harnack_experiment(
                &bounds, cfg.m1, cfg.m2, cfg.count, cfg.seed, &opts,
            )?)
        })?;
        ctx.emit_text("harnack.csv", &report.to_csv())?;
        ctx.emit_json("harnack.json", &report.summary())
    }
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct HeatConfig {
    command: String,
    #[serde(rename = "N")]
    dim: usize,
    s: f64,
    r_max: Option<f64>,
    quadrature: Option<QuadratureConfig>,
    seed: Option<u64>,
}

struct HeatCommand;

impl Command for HeatCommand {
    fn name(&self) -> &'static str {
        "heat"
    }

    fn about(&self) -> &'static str {
        "self-similar heat profile with kernel-bound and eigen-relation checks"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        let cfg: HeatConfig = ctx.parse()?;
        let grid = match cfg.r_max {
            Some(r) => Some(
                RadialGrid::geometric(r, 0.005, 1.02, cfg.dim)
                    .map_err(|e| CliError::Usage(e.to_string()))?,
            ),
            None => None,
        };
        let profile =
            ctx.step("heat_profile", || Ok(heat::heat_profile(cfg.dim, cfg.s, grid)?))?;
        let band = ctx.step("verify_kernel_bounds", || Ok(heat::verify_kernel_bounds(&profile)?))?;
        let residual = if cfg.s > 0.5 {
            let quad = cfg.quadrature.unwrap_or_default();
            Some(ctx.step("verify_eigen_relation", || {
                Ok(heat::verify_eigen_relation(
                    &profile,
                    &[0.0, 0.5, 1.0, 2.0, 5.0, 10.0],
                    &quad,
                )?)
            })?)
        } else {
            None
        };
        ctx.emit_field("profile", &profile.field)?;
        ctx.emit_json(
            "heat.json",
            &serde_json::json!({
                "N": profile.dim,
                "s": profile.s,
                "mass": profile.mass,
                "band": band,
                "eigen_relation_residual": residual,
            }),
        )
    }
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct DirichletConfig {
    command: String,
    kernel: KernelSpec,
    sign: Option<SignArg>,
    domain: DomainArg,
    rhs: f64,
    tol: Option<f64>,
    quadrature: Option<QuadratureConfig>,
    seed: Option<u64>,
}

struct DirichletCommand;

impl Command for DirichletCommand {
    fn name(&self) -> &'static str {
        "dirichlet"
    }

    fn about(&self) -> &'static str {
        "collocation solve of -F(u) = rhs on a bounded domain"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        let cfg: DirichletConfig = ctx.parse()?;
        let domain = DomainSpec::from(cfg.domain.clone());
        if matches!(domain, DomainSpec::WholeSpace { .. }) {
            return Err(CliError::Usage("dirichlet solves need a bounded domain".to_string()));
        }
        let spec = OperatorSpec::new(cfg.kernel.clone(), cfg.sign.unwrap_or(SignArg::Plus).into());
        let opts = solve_options(cfg.quadrature);
        let rhs_value = cfg.rhs;
        let rhs = AnalyticField::new("rhs", move |_| rhs_value, |_| 0.0);
        let u = ctx.step("solve_dirichlet", || {
            Ok(eigen::solve_dirichlet(
                &spec,
                &rhs,
                &domain,
                None,
                cfg.tol.unwrap_or(1e-10),
                &opts,
            )?)
        })?;
        let max = u.values().iter().fold(0.0f64, |m, v| m.max(*v));
        ctx.emit_field("u", &u)?;
        ctx.emit_json(
            "dirichlet.json",
            &serde_json::json!({"u_at_origin": u.values()[0], "max": max}),
        )
    }
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct AcceptanceConfig {
    command: String,
    criteria: Option<Vec<u32>>,
    seed: Option<u64>,
}

struct AcceptanceCommand;

impl Command for AcceptanceCommand {
    fn name(&self) -> &'static str {
        "acceptance"
    }

    fn about(&self) -> &'static str {
        "the full acceptance suite, one pass/fail line per criterion"
    }

    fn run(&self, ctx: &mut RunContext) -> Result<(), CliError> {
        let cfg: AcceptanceConfig = ctx.parse()?;
        let ids: Vec<u32> = cfg
            .criteria
            .unwrap_or_else(|| acceptance::CRITERIA.iter().map(|(id, _)| *id).collect());
        let mut results = Vec::new();
        for id in ids {
            let r = acceptance::run_criterion(id);
            println!("{}", acceptance::format_line(&r));
            ctx.steps.push(StepStatus {
                name: format!("criterion_{id:02}"),
                status: if r.passed { "ok" } else { "failed" }.to_string(),
                seconds: r.seconds,
            });
            results.push(r);
        }
        let mut csv = String::from("id,name,passed,seconds\n");
        for r in &results {
            csv.push_str(&format!("{},{},{},{:.3}\n", r.id, r.name, r.passed, r.seconds));
        }
        ctx.emit_text("acceptance.csv", &csv)?;
        ctx.emit_json("acceptance.json", &results)?;
        let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Computation(format!("criteria failed: {failed:?}")))
        }
    }
}

