use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cbond",
    version,
    about = "Perpetual convertible bonds with Poisson-constrained conversion and call"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Parameter source: a JSON file with the seven keys, then inline overrides.
/// Without a file the boundary-table market with `lambda = 1, c = 0.02` is used.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// JSON file with keys r, q, sigma, lambda, c, K, gamma.
    #[arg(long, visible_alias = "case-params", value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub q: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(
        long = "K",
        allow_negative_numbers = true,
        visible_alias = "k",
        value_name = "K"
    )]
    pub k: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// `csv` or `json` for standard output, or a file path (format taken
    /// from the extension unless --format is given).
    #[arg(long, default_value = "csv")]
    pub out: String,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LeftCondition {
    Asymptotic,
    Dirichlet,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form price, bounds and boundary at one or more spots.
    Price {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "1.0")]
        s0: Vec<f64>,
        /// Emit the solved closed form (always JSON) instead of prices.
        #[arg(long, conflicts_with = "solution")]
        dump_solution: bool,
        /// Price from a previously dumped solution.
        #[arg(long, value_name = "FILE")]
        solution: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Conversion boundary, residual and smooth-pasting report.
    Boundary {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        lambdas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        coupons: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Finite-difference solution against the closed form.
    OdeCheck {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(100..))]
        nodes: u64,
        /// Left end of the grid; defaults to s_bar * e^-6.
        #[arg(long)]
        s_min: Option<f64>,
        #[arg(long, value_enum, default_value = "asymptotic")]
        left: LeftCondition,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte Carlo value of the game under a strategy pair.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1.0)]
        s0: f64,
        #[arg(long, default_value_t = 200_000, value_parser = clap::value_parser!(u64).range(1..))]
        paths: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// `optimal`, or `<firm|investor>:<stop-at-first-arrival|stop-at-tm|never-before-tm|threshold:M>`
        /// with M a multiple of the boundary.
        #[arg(long, default_value = "optimal")]
        strategy: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Unilateral deviations from the equilibrium under common random numbers.
    Saddle {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1.0)]
        s0: f64,
        #[arg(long, default_value_t = 200_000, value_parser = clap::value_parser!(u64).range(1..))]
        paths: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Drift of the discounted value along optimal and deviated play.
    Drift {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1.0)]
        s0: f64,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        paths: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Lattice backward induction value.
    Lattice {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1.0)]
        s0: f64,
        #[arg(long, default_value_t = 2.5e-3)]
        dt: f64,
        /// Bound on the discounted strike beyond the horizon.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Conversion boundary over a grid of intensities and coupons.
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "1,100,10000")]
        lambdas: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0.005,0.01,0.015,0.02,0.025,0.03")]
        coupons: Vec<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Reproduce the boundary convergence table and compare with the
    /// reference values (exit 3 on mismatch).
    Table1 {
        #[command(flatten)]
        out: OutArgs,
    },
    /// Price curves for several intensities next to the unconstrained price.
    FigureData {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "1,10,100,1000,10000")]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        s_max: f64,
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(2..))]
        points: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}
