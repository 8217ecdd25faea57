//! `monoresp` command-line tool: fits, likelihood ratio tests, confidence
//! intervals, limit-law tables and Monte Carlo studies.

mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use monoresp::{CovariateLaw, Family, PsiSpec};
use serde::Serialize;
use thiserror::Error;

pub const TABLE_DIR_ENV: &str = "MONORESP_TABLE_DIR";
/// File looked up inside the table directory.
pub const DEFAULT_TABLE: &str = "d.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing quantile table: {0}")]
    MissingTable(String),
    #[error("{0}")]
    Output(String),
    #[error(transparent)]
    Lib(#[from] monoresp::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use monoresp::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::MissingTable(_) => 4,
            CliError::Lib(E::Domain(_) | E::Parse(_)) => 2,
            CliError::Lib(E::NonConvergence { .. } | E::Numerical(_) | E::FailureBudget { .. }) => 3,
            CliError::Lib(E::Io(_)) | CliError::Io(_) | CliError::Output(_) => 1,
        }
    }
}

fn parse_lib<T: std::str::FromStr<Err = monoresp::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: monoresp::Error| e.to_string())
}

#[derive(Parser)]
#[command(name = "monoresp", version, about = "Likelihood inference for monotone response models")]
struct Cli {
    /// Worker threads for Monte Carlo work (results do not depend on it).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monotone maximum likelihood fit of a `z,x` CSV.
    Fit(FitArgs),
    /// Likelihood ratio test of ψ(z0) = θ0.
    Test(TestArgs),
    /// Confidence interval for ψ(z0) by inverting the likelihood ratio test.
    Ci(CiArgs),
    /// Simulate a limit-law quantile table.
    Limit(LimitArgs),
    /// Monte Carlo studies.
    Mc {
        #[command(subcommand)]
        study: Study,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Auto,
    Icm,
}

#[derive(Args, Serialize)]
pub struct DataArgs {
    /// `gaussian:sigma2=<v>`, `bernoulli`, `poisson` or `curved_normal:m=,c=,d=`.
    #[arg(long, value_parser = parse_lib::<Family>)]
    pub family: Family,
    /// CSV file with header `z,x`.
    #[arg(long)]
    pub input: PathBuf,
    /// Fenchel tolerance.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
}

#[derive(Args, Serialize)]
pub struct TableArgs {
    /// Explicit 𝔻 table (overrides the table directory).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Directory holding `d.csv`.
    #[arg(long, env = TABLE_DIR_ENV)]
    pub table_dir: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub z0: f64,
    #[arg(long)]
    pub theta0: f64,
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct CiArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub z0: f64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    /// The likelihood ratio limit 𝔻.
    D,
    /// Chernoff's distribution via the argmin of W(h) + h².
    Chernoff,
    /// Chernoff's distribution via half the slope at 0.
    ChernoffSlope,
}

#[derive(Args, Serialize)]
pub struct LimitArgs {
    #[arg(value_enum)]
    pub statistic: LimitKind,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1000..))]
    pub n_paths: u64,
    /// Half-width of the simulation window.
    #[arg(long = "T", default_value_t = 4.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.005)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Curved normal, ψ(z) = z, Z ~ U[1, 2], z0 = 1.5.
    ExampleD,
    /// Gaussian (σ² = 1), ψ(z) = z, Z ~ U[0, 1], z0 = 0.5.
    Gaussian,
    /// Bernoulli, ψ(z) = z, Z ~ U(0.1, 0.9), z0 = 0.5.
    Binary,
}

#[derive(Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = Preset::ExampleD)]
    pub model: Preset,
    /// Overrides the preset's family.
    #[arg(long, value_parser = parse_lib::<Family>)]
    pub family: Option<Family>,
    /// `linear:slope=,intercept=`, `power:scale=,exponent=`,
    /// `logistic:rate=,center=,lo=,hi=` or `constant:value=`.
    #[arg(long, value_parser = parse_lib::<PsiSpec>)]
    pub psi: Option<PsiSpec>,
    /// `uniform:lo=,hi=` or `beta:alpha=,beta=,lo=,hi=`.
    #[arg(long, value_parser = parse_lib::<CovariateLaw>)]
    pub covariate: Option<CovariateLaw>,
    #[arg(long)]
    pub z0: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Study {
    /// LR statistics under the null, one row per replicate.
    Lrt {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Tested value (defaults to the true ψ(z0)).
        #[arg(long)]
        theta0: Option<f64>,
    },
    /// Pointwise error of the estimator across sample sizes.
    Estimator {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000,8000")]
        n_list: Vec<usize>,
    },
    /// Histogram of ICM iteration counts.
    Iterations {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
    },
    /// Coverage of LR-based confidence intervals.
    Coverage {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[command(flatten)]
        table: TableArgs,
    },
    /// Sorted null LR statistics paired with 𝔻 quantiles.
    Qq {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[command(flatten)]
        table: TableArgs,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Test(a) => commands::test(&a),
        Command::Ci(a) => commands::ci(&a),
        Command::Limit(a) => commands::limit(&a),
        Command::Mc { study } => match study {
            Study::Lrt { model, n, theta0 } => commands::mc_lrt(&model, n, theta0),
            Study::Estimator { model, n_list } => commands::mc_estimator(&model, &n_list),
            Study::Iterations { model, n, tol, max_iter } => commands::mc_iterations(&model, n, tol, max_iter),
            Study::Coverage { model, n, level, table } => commands::mc_coverage(&model, n, level, &table),
            Study::Qq { model, n, table } => commands::mc_qq(&model, n, &table),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("monoresp: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("monoresp: {e}");
            if let CliError::Lib(monoresp::Error::NonConvergence { last, .. }) = &e {
                eprintln!("monoresp: last iterate has {} values, range [{:?}, {:?}]", last.len(), last.first(), last.last());
            }
            ExitCode::from(e.exit_code())
        }
    }
}
