use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::{Format, Overrides};

/// Fits a piecewise-constant arrival rate to timestamped arrivals, choosing
/// interval boundaries so that every interval passes a conditional-uniform
/// Kolmogorov-Smirnov test and a dispersion test.
#[derive(Debug, Parser)]
#[command(name = "arrivalfit", version, about)]
struct Cli {
    /// Flat `key = value` file with default settings; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate arrivals from a piecewise-constant rate and write them as CSV.
    Simulate(SimulateArgs),
    /// Print the 15-minute empirical rate as CSV.
    Bin(BinArgs),
    /// Run both tests on every interval of a given partition.
    Check(CheckArgs),
    /// Search for the best feasible partition.
    Fit(FitArgs),
    /// Run `fit` over lists of weights and/or numbers of weeks.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Arrivals CSV with a `timestamp` column.
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    /// Day of the week to analyse (mon, tue, ...). [default: tue]
    #[arg(long)]
    weekday: Option<String>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Significance level of both tests. [default: 0.05]
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of grid units in the day. [default: 24]
    #[arg(long)]
    grid: Option<u32>,
    /// Maximum number of intervals. [default: 24]
    #[arg(long)]
    max_intervals: Option<usize>,
    /// Number of cells of the empirical rate. [default: 96]
    #[arg(long)]
    cells: Option<usize>,
    /// Minimum interval length in hours. [default: 1]
    #[arg(long)]
    ell_hours: Option<f64>,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Evaluation budget per run. [default: 5000]
    #[arg(long)]
    budget: Option<usize>,
    /// Seed of the search order. [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Independent runs with seeds seed, seed+1, ...; the best is kept. [default: 1]
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Format of what is printed to stdout. [default: text]
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Directory for report files. [default: beside the input]
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Rate segments as start-end:rate in hours and arrivals per hour,
    /// e.g. "0-12:2,12-24:6".
    #[arg(long)]
    segments: String,
    /// Number of weeks to simulate. [default: 13]
    #[arg(long)]
    weeks: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Weekday of the simulated dates. [default: tue]
    #[arg(long)]
    weekday: Option<String>,
    /// Per-week rate factors, cycled over the weeks, e.g. "1,3".
    #[arg(long, value_delimiter = ',')]
    scales: Vec<f64>,
    /// Earliest date; the first simulated day is the next matching weekday.
    #[arg(long, default_value = "2024-01-01")]
    start: chrono::NaiveDate,
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BinArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of weeks. [default: 13]
    #[arg(long)]
    weeks: Option<usize>,
    /// Number of cells. [default: 96]
    #[arg(long)]
    cells: Option<usize>,
    /// Write here instead of stdout.
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of weeks. [default: 13]
    #[arg(long)]
    weeks: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    /// Objective weight of the smoothness term. [default: 1]
    #[arg(long)]
    weight: Option<f64>,
    /// Interval boundaries in hours, e.g. "0,6,12,24". [default: hourly]
    #[arg(long, value_delimiter = ',')]
    boundaries: Vec<f64>,
    /// Format of the table. [default: text]
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of weeks. [default: 13]
    #[arg(long)]
    weeks: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    /// Objective weight of the smoothness term. [default: 1]
    #[arg(long)]
    weight: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Numbers of weeks to sweep, e.g. "5,9,13". [default: 13]
    #[arg(long, value_delimiter = ',')]
    weeks: Vec<usize>,
    /// Weights to sweep, e.g. "0,0.1,1,10,1000". [default: 1]
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

impl ModelArgs {
    fn apply(&self, o: &mut Overrides) {
        o.alpha = self.alpha;
        o.grid = self.grid;
        o.max_intervals = self.max_intervals;
        o.cells = self.cells;
        o.ell_hours = self.ell_hours;
    }
}

impl SolverArgs {
    fn apply(&self, o: &mut Overrides) {
        o.budget = self.budget;
        o.seed = self.seed;
        o.restarts = self.restarts;
    }
}

impl OutputArgs {
    fn apply(&self, o: &mut Overrides) {
        o.format = self.format;
        o.out_dir = self.out_dir.clone();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
