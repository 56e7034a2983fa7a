use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hodgeqi_cli::{commands, Status};

#[derive(Parser)]
#[command(name = "hodgeqi", version, about = "Helmholtz-Hodge decomposition by matrix-kernel quasi-interpolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence sweep on a large sample box.
    Wholespace(Args),
    /// Convergence sweep of the two-scale scheme on a bounded domain.
    Bounded(Args),
    /// Moment conditions, kernel identities and the FFT oracle.
    Validate(Args),
    /// Split one sampled field into its two parts on a mesh.
    Decompose(Args),
    /// Redraw a saved convergence report.
    Plot(Args),
    /// Sample one kernel on a mesh.
    KernelDump(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("HODGEQI_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().with_context(|| format!("HODGEQI_THREADS={raw:?} is not a count"))?;
    if n == 0 {
        bail!("HODGEQI_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<Status> {
    configure_threads()?;
    let (run, args): (fn(&Path, &Path) -> Result<Status>, Args) = match cli.command {
        Command::Wholespace(a) => (commands::wholespace, a),
        Command::Bounded(a) => (commands::bounded, a),
        Command::Validate(a) => (commands::validate, a),
        Command::Decompose(a) => (commands::decompose, a),
        Command::Plot(a) => (commands::plot, a),
        Command::KernelDump(a) => (commands::kernel_dump, a),
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    run(&args.config, &args.out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::ValidationFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
