use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nspike_cli::{run, Invocation, Mode};

/// Small-amplitude spike solutions of nonlocally coupled systems.
#[derive(Debug, Parser)]
#[command(name = "nspike", version)]
struct Args {
    /// JSON run configuration.
    config: PathBuf,
    /// solve | sweep | periodic | hypotheses-only | tail
    #[arg(long)]
    mode: Option<Mode>,
    /// Output directory (overrides NSPIKE_OUT and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mu: Option<f64>,
    /// Re-assemble the Jacobian at every corrector step.
    #[arg(long)]
    full_newton: bool,
}

fn main() -> anyhow::Result<ExitCode> {
    let args = Args::parse();
    let outcome = run(&Invocation {
        config: args.config,
        mode: args.mode,
        out: args.out,
        mu: args.mu,
        full_newton: args.full_newton,
    });
    if let Some(e) = &outcome.error {
        eprintln!("nspike: {e}");
    }
    if !outcome.out_dir.as_os_str().is_empty() && outcome.exit_code != 1 {
        eprintln!("nspike: artifacts in {}", outcome.out_dir.display());
    }
    Ok(ExitCode::from(outcome.exit_code as u8))
}
