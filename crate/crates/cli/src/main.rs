//! Batch entry point: a JSON config selects one registered command; outputs
//! land in the chosen directory together with a hashed run manifest.
//!
//! Exit codes: 0 success, 2 usage/config error, 1 computation failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::{CliError, Registry, RunContext};
use manifest::{hash_file, RunManifest};

#[derive(Parser)]
#[command(name = "fraclab", version, about = "nonlocal-operator laboratory runner")]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Stream step diagnostics as JSON lines on stderr.
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Computation(m)) => {
            eprintln!("computation failed: {m}");
            ExitCode::from(1)
        }
    }
}

fn run(args: &Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", args.config.display())))?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(e.to_string()))?;
    let name = raw
        .get("command")
        .and_then(|v| v.as_str())
        .ok_or_else(|| CliError::Usage("config needs a string `command` key".to_string()))?
        .to_string();
    let registry = Registry::builtin();
    let command = registry.find(&name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown command `{name}`; available ({}):\n{}",
            registry.names().join(", "),
            registry.describe()
        ))
    })?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", args.out.display())))?;

    let started = chrono::Utc::now().to_rfc3339();
    let mut ctx = RunContext {
        raw: &raw,
        out: &args.out,
        verbose: args.verbose,
        outputs: Vec::new(),
        steps: Vec::new(),
    };
    let result = command.run(&mut ctx);

    let outputs = ctx
        .outputs
        .iter()
        .map(|p| hash_file(p))
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(|e| CliError::Computation(e.to_string()))?;
    let manifest = RunManifest {
        tool: "fraclab".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: name,
        config: raw.clone(),
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        steps: ctx.steps.clone(),
        outputs,
    };
    manifest.write(&args.out).map_err(|e| CliError::Computation(e.to_string()))?;
    result
}
