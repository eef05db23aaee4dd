//! `cvt`: centroidal Voronoi tessellations via electrostatic annealing.
//!
//! Exit codes: 0 success, 1 config error, 2 non-convergence, 3 recovery
//! failure, 4 spectrum violation.

mod commands;
mod config;
mod io;
mod svg;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cvt",
    version,
    about = "Centroidal Voronoi tessellations via electrostatic annealing: \
             Lloyd runs, rate sweeps, minima atlases, and spectrum checks."
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory receiving all artifacts.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,
    /// Master seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Concurrency bound for independent (schedule, seed) jobs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Gauss-Legendre points per boundary edge, overriding the config file.
    #[arg(long, global = true)]
    quadrature: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Lloyd's algorithm to a CVT; writes cvt.json and cvt.svg.
    Lloyd,
    /// Anneal one run per (schedule, seed); writes RunRecord JSON and
    /// trajectory CSV per run.
    Anneal,
    /// Full pipeline: rate sweep, minima clustering, anchors, recovery;
    /// writes atlas.json and one SVG per cluster.
    Laam,
    /// Lloyd to a CVT, then projected Hessian spectra of all three
    /// functionals; writes spectra.json.
    Verify,
    /// One-shot energy report for the configured points; writes energy.json.
    Energy,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };

    let Some(config_path) = &cli.config else {
        eprintln!("config error: --config <PATH> is required");
        return 1;
    };
    let experiment = match config::load(config_path, cli.seed, cli.quadrature) {
        Ok(exp) => exp,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };

    #[cfg(feature = "parallel")]
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("config error: --jobs must be at least 1");
            return 1;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("note: could not bound the thread pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if cli.jobs.is_some() {
        eprintln!("note: built without the parallel feature; --jobs is ignored");
    }

    let result = match cli.command {
        Command::Lloyd => commands::lloyd(&experiment, &cli.out),
        Command::Anneal => commands::anneal_cmd(&experiment, &cli.out),
        Command::Laam => commands::laam(&experiment, &cli.out),
        Command::Verify => commands::verify(&experiment, &cli.out),
        Command::Energy => commands::energy(&experiment, &cli.out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
