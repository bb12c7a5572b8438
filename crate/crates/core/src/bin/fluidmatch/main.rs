//! Command-line front end for the fluid matching LP, concavity diagnostics
//! and pricing solvers.

mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Status;

#[derive(Parser)]
#[command(name = "fluidmatch", version, about = "Fluid matching LP, concavity diagnostics and MM pricing")]
struct Cli {
    /// Output format written to stdout.
    #[arg(long, value_enum, default_value = "table", global = true)]
    format: Format,
    /// Directory that receives the command's artifacts (JSON and CSV).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Args)]
pub struct InstanceArg {
    /// Instance or bundle JSON file.
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the fluid LP at given arrival rates
    Solve {
        #[command(flatten)]
        input: InstanceArg,
        /// Comma-separated arrival rates
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
    },
    /// Classify a two-type point and compare closed form with the LP
    Classify {
        #[command(flatten)]
        input: InstanceArg,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
    },
    /// Certify (weak) concavity of the cost on the instance's rate box
    Certify {
        #[command(flatten)]
        input: InstanceArg,
    },
    /// Numerical curvature checks: Hessian, one-sided slopes, midpoint probes
    Diagnose {
        #[command(flatten)]
        input: InstanceArg,
        /// Point for the Hessian and one-sided slopes
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
        /// Relative finite-difference step
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        /// Coordinate for one-sided slopes (0-based)
        #[arg(long)]
        coord: Option<usize>,
        /// Midpoint pairs to sample (0 skips the probe)
        #[arg(long, default_value_t = 0)]
        probe: usize,
        /// Curvature shift for the probe
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
        /// Search for a curvature shift passing the probe, up to this cap
        #[arg(long)]
        rho_search: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Maximize revenue minus matching cost with MM or projected gradient
    Price(PriceArgs),
    /// Cluster a trips CSV into a typed instance bundle
    Ingest(IngestArgs),
    /// Generate synthetic trips as CSV
    Synth {
        #[arg(long, default_value_t = 1000)]
        trips: usize,
        #[arg(long, default_value_t = 5)]
        hotspots: usize,
        /// Standard deviation of each coordinate around its hotspot (miles)
        #[arg(long, default_value_t = 0.5)]
        spread: f64,
        /// Side of the square holding the hotspots (miles)
        #[arg(long, default_value_t = 10.0)]
        extent: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Destination CSV; stdout when absent
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare MM and projected gradient over instances and seeds
    Benchmark(BenchmarkArgs),
    /// Reproduce the worked non-concavity and multimodality examples
    Examples {
        /// Example number 1 to 5; all when absent
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        id: Option<u8>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Mm,
    Pg,
}

#[derive(Args)]
pub struct PriceArgs {
    #[command(flatten)]
    input: InstanceArg,
    #[arg(long, value_enum, default_value = "mm")]
    solver: SolverArg,
    /// Per-type solo trip length; required unless the input is a bundle
    #[arg(long, value_delimiter = ',')]
    solo_length: Option<Vec<f64>>,
    /// Per-type rate at which price reaches zero; defaults to the box top
    #[arg(long, value_delimiter = ',')]
    max_rate: Option<Vec<f64>>,
    /// Start point; drawn uniformly from the box with --seed when absent
    #[arg(long, value_delimiter = ',')]
    lambda0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Wall-clock cap in seconds
    #[arg(long, default_value_t = 1200.0)]
    time_cap: f64,
    /// Initial projected-gradient step
    #[arg(long, default_value_t = 1.0)]
    step0: f64,
    /// Curvature increment after a rejected MM step
    #[arg(long)]
    delta_mm: Option<f64>,
    #[arg(long, default_value_t = 1e6)]
    rho_cap: f64,
}

#[derive(Args)]
pub struct IngestArgs {
    /// Trips CSV with origin_x, origin_y, dest_x, dest_y
    #[arg(long)]
    trips: PathBuf,
    #[arg(long, default_value_t = 10)]
    n_types: usize,
    #[arg(long, default_value_t = 0.7)]
    c_per_mile: f64,
    /// `equal:THETA` or `uniform:LOW,HIGH`
    #[arg(long, default_value = "equal:1")]
    theta: String,
    /// Hours covered by the trips file
    #[arg(long, default_value_t = 1.0)]
    hours: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the bundle JSON
    #[arg(long)]
    bundle: PathBuf,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    /// Bundle JSON files to benchmark
    #[arg(long)]
    bundle: Vec<PathBuf>,
    /// Synthetic type counts, e.g. 10,50
    #[arg(long, value_delimiter = ',')]
    synthetic_n: Vec<usize>,
    /// Cost-per-mile values for synthetic instances
    #[arg(long, value_delimiter = ',', default_value = "0.7,0.9,1.1")]
    c_per_mile: Vec<f64>,
    /// `equal:THETA` or `uniform:LOW,HIGH` for synthetic instances
    #[arg(long, default_value = "equal:1")]
    theta: String,
    /// Solvers: `mm` and `pg:STEP0`
    #[arg(long, value_delimiter = ',', default_value = "mm,pg:1,pg:10,pg:100")]
    solvers: Vec<String>,
    /// Start-point seeds; every solver shares the start of a (case, seed) cell
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    /// Seed of the synthetic trips behind each synthetic instance
    #[arg(long, default_value_t = 0)]
    instance_seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 1200.0)]
    time_cap: f64,
    #[arg(long)]
    delta_mm: Option<f64>,
}

/// Failure classes mapped onto exit codes.
pub enum Failure {
    Input(String),
    Numerical(String),
}

impl From<fluidmatch::Error> for Failure {
    fn from(e: fluidmatch::Error) -> Self {
        if e.is_validation() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { input, lambda } => commands::solve(&input, &lambda, cli.format),
        Command::Classify { input, lambda } => commands::classify(&input, &lambda, cli.format),
        Command::Certify { input } => commands::certify(&input, cli.format),
        Command::Diagnose {
            input,
            lambda,
            step,
            coord,
            probe,
            rho,
            rho_search,
            seed,
        } => commands::diagnose(
            &input,
            commands::DiagnoseOptions {
                lambda,
                step,
                coord,
                probe,
                rho,
                rho_search,
                seed,
            },
            cli.format,
        ),
        Command::Price(args) => commands::price(&args, cli.format),
        Command::Ingest(args) => commands::ingest(&args, cli.format),
        Command::Synth {
            trips,
            hotspots,
            spread,
            extent,
            seed,
            output,
        } => commands::synth(trips, hotspots, spread, extent, seed, output.as_deref()),
        Command::Benchmark(args) => commands::benchmark(&args, cli.format),
        Command::Examples { id } => commands::examples(id, cli.format),
    };
    match result {
        Ok(outcome) => {
            print!("{}", outcome.text);
            if let Some(dir) = &cli.out {
                if let Err(e) = write_artifacts(dir, &outcome.artifacts) {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            ExitCode::from(match outcome.status {
                Status::Done => 0,
                Status::Failed => 3,
                Status::Partial => 4,
            })
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn write_artifacts(dir: &std::path::Path, files: &[(String, String)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}
