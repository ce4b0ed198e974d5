//! Command-line front end: configuration-driven runs of the recursion
//! pipeline with JSON (or CSV) results.

mod config;
mod output;
mod run;

use clap::{Parser, Subcommand};
use std::io::Write;
use std::process::ExitCode;

use config::{BackendSpec, RunConfig};
use run::{Command, Format};

#[derive(Parser)]
#[command(
    name = "nctr",
    about = "Topological recursion over Bethe-ansatz spectral data"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Solve the Bethe system: roots, Hessian and its inverse only.
    Solve(CommonArgs),
    /// Solve and compute the requested correlator tensors.
    Correlators(CommonArgs),
    /// Solve and compute the requested free energies.
    FreeEnergy(CommonArgs),
    /// Full pipeline plus the requested identity checks (exit 2 on failure).
    Verify(CommonArgs),
    /// Compare the truncated free-energy sums against the exact
    /// Gamma-function partition integral (needs an `oracle` config block).
    Oracle(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: String,
    /// Override the configured backend: rational | double | bigfloat:<bits>.
    #[arg(long)]
    backend: Option<String>,
    /// Override the configured thread count.
    #[arg(long)]
    threads: Option<usize>,
    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the result document here instead of the configured path/stdout.
    #[arg(long)]
    out: Option<String>,
    /// Output format.
    #[arg(long, default_value = "json")]
    format: String,
}

fn parse_backend(s: &str) -> Result<BackendSpec, String> {
    match s {
        "rational" => Ok(BackendSpec::Rational),
        "double" => Ok(BackendSpec::Double),
        other => {
            if let Some(bits) = other.strip_prefix("bigfloat:") {
                let bits: usize = bits
                    .parse()
                    .map_err(|e| format!("bad bigfloat bits {bits:?}: {e}"))?;
                Ok(BackendSpec::Bigfloat { bits })
            } else {
                Err(format!("unknown backend {other:?}"))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        CliCommand::Solve(a) => (Command::Solve, a),
        CliCommand::Correlators(a) => (Command::Correlators, a),
        CliCommand::FreeEnergy(a) => (Command::FreeEnergy, a),
        CliCommand::Verify(a) => (Command::Verify, a),
        CliCommand::Oracle(a) => (Command::Oracle, a),
    };
    match drive(cmd, args) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            let diag = serde_json::json!({ "error": msg });
            eprintln!("{diag}");
            ExitCode::from(1)
        }
    }
}

fn drive(cmd: Command, args: &CommonArgs) -> Result<u8, String> {
    let raw = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read config {:?}: {e}", args.config))?;
    let mut cfg: RunConfig = serde_json::from_str(&raw)
        .map_err(|e| format!("config parse error in {:?}: {e}", args.config))?;
    if let Some(b) = &args.backend {
        cfg.backend = parse_backend(b)?;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let format = match args.format.as_str() {
        "json" => Format::Json,
        "csv" => Format::Csv,
        other => return Err(format!("unknown format {other:?}")),
    };
    let outcome = run::execute(cmd, &cfg, format)?;
    let out_path = args.out.clone().or(cfg.out.clone());
    match out_path {
        Some(path) => std::fs::write(&path, outcome.document.as_bytes())
            .map_err(|e| format!("cannot write {path:?}: {e}"))?,
        None => {
            std::io::stdout()
                .write_all(outcome.document.as_bytes())
                .map_err(|e| format!("stdout: {e}"))?;
        }
    }
    Ok(outcome.exit_code as u8)
}
