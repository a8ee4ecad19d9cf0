use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rfcw_cli::{dispatch, output_dir, parse_config, Format, Job};

/// Random-field Curie-Weiss toolkit: phase diagram, dynamics, operator
/// calculus, limiting Hamiltonians and acceptance checks.
#[derive(Parser)]
#[command(name = "rfcw", version)]
struct Cli {
    /// Output directory [default: $RFCW_OUT_DIR, else the working directory]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    #[command(flatten)]
    Job(Job),
    /// Run a JSON configuration document.
    Run { config: PathBuf },
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (job, dir, format) = match cli.cmd {
        Cmd::Job(job) => (
            job,
            output_dir(cli.out.as_deref()),
            cli.format.unwrap_or_default(),
        ),
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", config.display()))?;
            let cfg = parse_config(&text)?;
            let dir = output_dir(cli.out.as_deref().or(cfg.out.as_deref()));
            (cfg.job, dir, cli.format.unwrap_or(cfg.format))
        }
    };
    let outcome = dispatch(&job, &dir, format)?;
    for m in &outcome.messages {
        println!("{m}");
    }
    Ok(outcome.ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
