//! `qhx`: command-line front end.
//!
//! Exit codes: 0 success, 1 a checked statement failed, 2 usage or config
//! error, 3 numerical failure. `QHX_THREADS` caps the worker threads.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "qhx", version, about = "Quasihyperbolic growth, Orlicz energies and cusp counterexamples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sampled check of an s-hyperbolic or generalized growth bound.
    Growth(commands::GrowthArgs),
    /// Quasihyperbolic distance between two points.
    QhDist(commands::QhDistArgs),
    /// Dyadic convergence scan of a singular integrand over a λ grid.
    Scan(commands::ScanArgs),
    /// Sup over boundary points of the condition integral.
    Thm31(commands::Thm31Args),
    /// Harmonic extension and its Orlicz and weighted energies.
    Energy(commands::EnergyArgs),
    /// Cusp counterexample: build, solve, audit and trend.
    Counterexample(commands::CounterexampleArgs),
    /// Partial sums of the critical and control series.
    Series(commands::SeriesArgs),
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("QHX_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("QHX_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Growth(a) => commands::growth(a),
        Command::QhDist(a) => commands::qh_dist(a),
        Command::Scan(a) => commands::scan(a),
        Command::Thm31(a) => commands::thm31(a),
        Command::Energy(a) => commands::energy(a),
        Command::Counterexample(a) => commands::counterexample(a),
        Command::Series(a) => commands::series(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
