use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use graphdep::stieltjes::{density_csv, DensityPoint};
use graphdep_cli::commands::{self, to_json, MatrixChoice};
use graphdep_cli::io::{parse_grid, parse_size, write_text};
use graphdep_cli::{CliError, CliResult, ExperimentConfig};

/// Spectra of sample covariance matrices for graph-dependent data.
#[derive(Parser)]
#[command(name = "graphdep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degree, greedy dominating set and its certified d for an edge list.
    GraphStats { file: PathBuf },
    /// Simulate once and compare the ESD with the limiting law.
    Compare {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// KS distance across sizes with a common ratio p/n.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// Comma-separated `PxN` pairs, e.g. 100x200,200x400.
        #[arg(long, value_delimiter = ',', value_parser = parse_size, required = true)]
        sizes: Vec<(usize, usize)>,
        /// Number of consecutive seeds to average over.
        #[arg(long, default_value_t = 1)]
        seeds: usize,
    },
    /// Monte Carlo check of the quadratic-form variance bounds.
    VerifyBounds {
        #[arg(short, long)]
        config: PathBuf,
        /// Symmetric matrix as CSV.
        #[arg(long, conflicts_with = "matrix_kind")]
        matrix: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MatrixKind::Identity)]
        matrix_kind: MatrixKind,
    },
    /// Density of the fixed-point law for a discrete population spectrum.
    Stieltjes {
        /// CSV of `lambda,weight` atoms.
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        rho: f64,
        /// `a:b:n`.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        eta: Option<f64>,
        /// Write the CSV here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixKind {
    Identity,
    RotatedDiag,
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("GRAPHDEP_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Input(format!("GRAPHDEP_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::GraphStats { file } => print!("{}", to_json(&commands::graph_stats(&file)?)),
        Command::Compare { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            print!("{}", to_json(&commands::compare(&cfg)?));
        }
        Command::Sweep { config, sizes, seeds } => {
            let cfg = ExperimentConfig::load(&config)?;
            print!("{}", to_json(&commands::sweep(&cfg, &sizes, seeds)?));
        }
        Command::VerifyBounds {
            config,
            matrix,
            matrix_kind,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let choice = match (matrix, matrix_kind) {
                (Some(path), _) => MatrixChoice::File(path),
                (None, MatrixKind::Identity) => MatrixChoice::Identity,
                (None, MatrixKind::RotatedDiag) => MatrixChoice::RotatedDiag,
            };
            print!("{}", to_json(&commands::verify_bounds(&cfg, &choice)?));
        }
        Command::Stieltjes {
            mu,
            rho,
            grid,
            eta,
            output,
        } => {
            let points = commands::stieltjes(&mu, rho, &parse_grid(&grid)?, eta)?;
            let csv = density_csv(&points);
            match output {
                Some(path) => write_text(&path, &csv)?,
                None => print!("{csv}"),
            }
            let failed: Vec<&DensityPoint> = points.iter().filter(|p| !p.converged).collect();
            if let Some(first) = failed.first() {
                return Err(CliError::PartialDensity {
                    failed: failed.len(),
                    total: points.len(),
                    first_x: first.x,
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
