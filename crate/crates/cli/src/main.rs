//! `satnls`: solve, reconstruct, scan and audit saturated Schrödinger problems.

mod commands;
mod config;
mod io;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Common, Status};

#[derive(Parser)]
#[command(name = "satnls", version, about)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the weak-residual test family and random starts.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn common(&self) -> Common<'_> {
        Common {
            config: &self.config,
            out: self.out.as_deref(),
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the stationary problem and write fields, report and audit.
    Solve(RunArgs),
    /// Solve for the profile and reconstruct the evolution at given times.
    Selfsimilar {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated times, e.g. `1,4,9`.
        #[arg(long = "t", value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// Number of mesh halvings for the evolution residual study.
        #[arg(long)]
        refine: Option<u32>,
    },
    /// Sweep core and tail forcing scales and record support containment.
    Scan(RunArgs),
    /// Recompute every audit from a solve output directory.
    Audit {
        /// Directory written by `satnls solve`.
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<satnls_core::Error>() {
        Some(satnls_core::Error::SingularSystem { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SATNLS_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Solve(run) => commands::solve(&run.common()),
        Command::Selfsimilar { run, times, refine } => commands::selfsimilar(&run.common(), times.clone(), *refine),
        Command::Scan(run) => commands::scan(&run.common()),
        Command::Audit { out } => commands::audit(out),
    };
    match result {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("error: the solve did not converge; artifacts were still written");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
