use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::run::{Mode, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "icin", version, about = "Full-data models for multivariate nonresponse")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full-data distribution and functionals from a table or microdata.
    Categorical(RunArgs),
    /// Dirichlet posterior draws pushed through the full-data map.
    Posterior(RunArgs),
    /// Functionals over a grid of sensitivity offsets.
    Sensitivity(RunArgs),
    /// Kernel-density model for two continuous items.
    Continuous(RunArgs),
    /// Monotone dropout model.
    Monotone(RunArgs),
    /// Check whether an independence assumption is refuted by the data.
    Diagnose(RunArgs),
    /// Draw masked records from the full-data distribution.
    Simulate(RunArgs),
    /// Re-run the configuration recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON table or CSV microdata.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON column schema for CSV microdata.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Weight column.
    #[arg(long)]
    pub weights: Option<String>,
    /// Comma-separated item columns.
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    /// Row filter such as `age>=18`; repeatable.
    #[arg(long = "filter")]
    pub filters: Vec<String>,
    /// Token read as missing besides the empty string [default: NA].
    #[arg(long)]
    pub missing_token: Option<String>,
    /// Symmetric Dirichlet concentration [default: 1 / number of observed cells].
    #[arg(long)]
    pub prior: Option<f64>,
    /// Number of posterior draws [default: 5000].
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sensitivity function (JSON).
    #[arg(long)]
    pub xi: Option<PathBuf>,
    /// Sensitivity grid, or the quadrature grid in continuous mode (JSON).
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// `name=item=level,item=level`; repeatable.
    #[arg(long = "functional")]
    pub functionals: Vec<String>,
    /// Number of simulated records [default: 1000].
    #[arg(short = 'n', long = "records")]
    pub records: Option<usize>,
    /// Indicator item of the assumption under test.
    #[arg(long)]
    pub j: Option<String>,
    /// Value item of the assumption under test.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also fit the two-item closed form with X1 always observed.
    #[arg(long)]
    pub hausman_wise: bool,
    /// Write the pattern densities on the quadrature grid.
    #[arg(long)]
    pub dump_grid: bool,
    /// Add complete-case values of the functionals.
    #[arg(long)]
    pub baseline: bool,
    /// Points per missingness curve [default: 101].
    #[arg(long)]
    pub curve_points: Option<usize>,
}

impl RunArgs {
    pub fn into_config(self, mode: Mode) -> RunConfig {
        RunConfig {
            mode,
            input: self.input,
            out: self.out,
            schema: self.schema,
            weights: self.weights,
            columns: self.columns,
            filters: self.filters,
            missing_token: self.missing_token,
            prior: self.prior,
            draws: self.draws,
            seed: self.seed,
            xi: self.xi,
            grid: self.grid,
            functionals: self.functionals,
            records: self.records,
            j: self.j,
            k: self.k,
            tol: self.tol,
            hausman_wise: self.hausman_wise,
            dump_grid: self.dump_grid,
            baseline: self.baseline,
            curve_points: self.curve_points,
        }
    }
}

impl Command {
    /// The run configuration, or `None` for `replay`.
    pub fn into_config(self) -> Option<RunConfig> {
        let (mode, args) = match self {
            Command::Categorical(a) => (Mode::Categorical, a),
            Command::Posterior(a) => (Mode::Posterior, a),
            Command::Sensitivity(a) => (Mode::Sensitivity, a),
            Command::Continuous(a) => (Mode::Continuous, a),
            Command::Monotone(a) => (Mode::Monotone, a),
            Command::Diagnose(a) => (Mode::Diagnose, a),
            Command::Simulate(a) => (Mode::Simulate, a),
            Command::Replay { .. } => return None,
        };
        Some(args.into_config(mode))
    }
}
