mod commands;
mod pairfile;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcal_core::dcal::OosScheme;

/// Correlation tests with data calibration, batch screening and simulations.
#[derive(Parser, Debug)]
#[command(name = "dcal", version, about, long_about = None)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Significance level [default: 0.05]
    #[arg(long, global = true)]
    pub alpha: Option<f64>,

    /// Master seed for resampling schemes, permutations and simulations
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Out-of-sample scheme for dcal [default: loo]
    #[arg(long, global = true, value_enum)]
    pub scheme: Option<SchemeArg>,

    /// Print machine-readable JSON instead of tables
    #[arg(long, global = true)]
    pub json: bool,

    /// Worker threads (0 = all cores)
    #[arg(long, global = true, env = "DCAL_THREADS")]
    pub threads: Option<usize>,
}

impl Global {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.05)
    }

    pub fn scheme(&self) -> OosScheme {
        let scheme = self.scheme.unwrap_or(SchemeArg::Loo).scheme();
        scheme.with_seed(self.seed.unwrap_or(0))
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeArg {
    Loo,
    Cv10x10,
    Boot632,
}

impl SchemeArg {
    pub fn scheme(self) -> OosScheme {
        match self {
            SchemeArg::Loo => OosScheme::loo(),
            SchemeArg::Cv10x10 => OosScheme::repeated_kfold(10, 10),
            SchemeArg::Boot632 => OosScheme::boot632(100),
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Test one pair of variables
    Test(TestArgs),
    /// Screen every feature of a matrix against a target feature
    Screen(ScreenArgs),
    /// Run a simulation experiment described by a config file
    Simulate(SimulateArgs),
    /// Compare all methods on Anscombe's quartet
    Anscombe,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    /// Delimited file with the two variables as columns (optional header row)
    pub input: Option<PathBuf>,

    /// Columns to use, by header name or 1-based index [default: first two]
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,

    /// Inline x values, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "input")]
    pub x: Option<Vec<f64>>,

    /// Inline y values, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "x")]
    pub y: Option<Vec<f64>>,

    /// Extra methods: sellke, bickel, ppbf, skipped, or all
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,

    /// Skip out-of-sample work when the classical test is not significant
    #[arg(long)]
    pub fast: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingArg {
    Drop,
    Fail,
}

#[derive(Args, Debug)]
pub struct ScreenArgs {
    /// Feature matrix: header row of sample ids, one feature per row
    pub matrix: PathBuf,

    /// Name of the feature every other feature is tested against
    #[arg(long)]
    pub target: String,

    /// Battery corrections: holm, bh, perm, permmax, uncorrected
    #[arg(long, value_delimiter = ',', default_value = "holm,bh")]
    pub corrections: Vec<String>,

    /// Run the out-of-sample step for every feature, not only significant ones
    #[arg(long)]
    pub no_fast: bool,

    /// Report path [default: standard output]
    #[arg(long, short)]
    pub output: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,

    /// Input has one sample per row and one feature per column
    #[arg(long)]
    pub samples_as_rows: bool,

    #[arg(long, value_enum, default_value = "drop")]
    pub missing: MissingArg,

    #[arg(long, default_value_t = ',')]
    pub delimiter: char,

    /// Permutations for perm and permmax
    #[arg(long, default_value_t = 999)]
    pub permutations: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Experiment config (`key = value` lines)
    pub config: PathBuf,

    /// Override the methods listed in the config
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,

    /// Override the number of repetitions
    #[arg(long)]
    pub repetitions: Option<usize>,

    /// Override the number of permutations
    #[arg(long)]
    pub permutations: Option<usize>,

    /// Output prefix; writes PREFIX.csv and PREFIX.json [default: tables to standard output]
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// A failure with the exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    /// Malformed or unusable input.
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: error.into(),
        }
    }

    /// Missing or degenerate screening target.
    pub fn target(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 3,
            error: error.into(),
        }
    }

    pub fn other(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            error: error.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Test(args) => commands::test(&cli.global, args),
        Command::Screen(args) => commands::screen(&cli.global, args),
        Command::Simulate(args) => commands::simulate(&cli.global, args),
        Command::Anscombe => commands::anscombe(&cli.global),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
