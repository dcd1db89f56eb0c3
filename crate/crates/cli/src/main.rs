//! `tiltsmooth` command line: fit one estimator to a CSV, run Monte Carlo
//! campaigns, and compare estimators on daily count series or dose-response
//! data. One subcommand per workflow; every run drops a `manifest.json`
//! recording the resolved inputs so results can be reproduced exactly.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tiltsmooth::Kernel;

#[derive(Parser)]
#[command(name = "tiltsmooth", version, about = "Tilted linear smoothers: fitting and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a single estimator to an x,y CSV and write the fitted curve.
    Fit(FitArgs),
    /// Run a Monte Carlo campaign described by a config file.
    Simulate(SimulateArgs),
    /// Compare estimators on daily count series, per country and field.
    Covid(CovidArgs),
    /// Compare smoothers and a robust 4PL fit on dose-response data.
    Dose(DoseArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Base seed for stochastic steps; recorded in the manifest.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Affects runtime only, never output.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Gaussian,
    Epanechnikov,
}

impl KernelArg {
    fn kernel(self) -> Kernel {
        match self {
            KernelArg::Gaussian => Kernel::Gaussian,
            KernelArg::Epanechnikov => Kernel::Epanechnikov,
        }
    }
}

/// Estimator settings shared by the fitting subcommands.
#[derive(Args)]
struct EstimatorArgs {
    /// Kernel of the NW/LL smoothers (the IO smoother always uses the
    /// flat-top trapezoid).
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    kernel: KernelArg,
    /// Weighting nodes of tilted estimators.
    #[arg(long, default_value_t = 4)]
    nodes: usize,
    /// Points in output/quadrature grids.
    #[arg(long, default_value_t = 201)]
    grid_points: usize,
    /// Objective evaluation budget per bandwidth in the tilting search.
    #[arg(long, default_value_t = 500)]
    max_evals: usize,
    /// Size of the bandwidth sweep grid.
    #[arg(long, default_value_t = 40)]
    h_grid_len: usize,
    /// Relative objective-change tolerance of the tilting search.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with `x,y` columns.
    #[arg(long)]
    input: PathBuf,
    /// Estimator: nw | ll | io | tilted-nw | tilted-ll.
    #[arg(long)]
    estimator: String,
    /// Fixed bandwidth, overriding CV / rule-of-thumb selection.
    #[arg(long)]
    h: Option<f64>,
    #[command(flatten)]
    est: EstimatorArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Campaign config file (TOML).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CovidArgs {
    /// Input CSV of daily counts.
    #[arg(long)]
    input: PathBuf,
    /// Restrict to one country (default: every country in the file).
    #[arg(long)]
    country: Option<String>,
    /// Which count column to fit: cases | deaths | both.
    #[arg(long, default_value = "both")]
    field: String,
    /// Replacement for zero counts before the log transform.
    #[arg(long, default_value_t = 0.5)]
    zero_replacement: f64,
    /// Column holding the date.
    #[arg(long, default_value = "dateRep")]
    date_col: String,
    /// Column holding the country name.
    #[arg(long, default_value = "countriesAndTerritories")]
    country_col: String,
    /// Column holding daily cases.
    #[arg(long, default_value = "cases")]
    cases_col: String,
    /// Column holding daily deaths.
    #[arg(long, default_value = "deaths")]
    deaths_col: String,
    /// Date format of the date column.
    #[arg(long, default_value = "%d/%m/%Y")]
    date_format: String,
    #[command(flatten)]
    est: EstimatorArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct DoseArgs {
    /// Input CSV with `dose,response` columns.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    est: EstimatorArgs,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match &cli.command {
        Command::Fit(a) => a.common.threads,
        Command::Simulate(a) => a.common.threads,
        Command::Covid(a) => a.common.threads,
        Command::Dose(a) => a.common.threads,
    };
    if threads > 0 {
        // The pool size changes scheduling only; all reductions are ordered.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let result = match cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Covid(args) => commands::covid(args),
        Command::Dose(args) => commands::dose(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::MissingInput(path)) => {
            eprintln!("error: input path {} does not exist", path.display());
            ExitCode::from(2)
        }
        Err(commands::CliError::Other(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
