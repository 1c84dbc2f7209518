//! Command line and config-file parsing into a validated [`RunConfig`].
//!
//! Every option can come from a TOML file (`--config`) with the same name in
//! snake case; flags win over file values, and per-command defaults fill the
//! rest. Unknown file keys are rejected.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use netstress_core::{ModelParams, SimConfig};

use crate::engine::THREADS_ENV;
use crate::error::{AppError, Result};
use crate::output::OutputFormat;

/// Interbank network stress: Monte Carlo, short-time expansions and figure
/// reproductions.
#[derive(Debug, Parser)]
#[command(name = "netstress", version, about, long_about = None)]
pub struct Cli {
    /// Command to run.
    #[command(subcommand)]
    pub command: CommandArgs,
}

/// Subcommands; all share the same option set.
#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Monte Carlo stress and squared market level for one matrix
    /// [defaults: n=10 sigma=1 beta=1 gamma=0 t=1 trials=1000 matrix=gaussian].
    Simulate(RunArgs),
    /// Closed-form short-time expansions for one matrix, as JSON
    /// [defaults: n=10 sigma=1 beta=0.1 gamma=0.5 t=0.2 matrix=gaussian].
    Expansion(RunArgs),
    /// Exact correlations by quadrature against the expansion, as JSON
    /// [defaults: as expansion, tol=1e-10].
    Quadrature(RunArgs),
    /// Interaction correction versus gamma over a Gaussian ensemble
    /// [defaults: n=30 sigma=100 beta=0.01 t=1 gammas=0.5,1,2,3,4 matrices=1000 trials=100].
    Fig2(RunArgs),
    /// Exposure nonlinearity cells versus the linear model
    /// [defaults: n=30 sigma=100 beta=0.01 gamma=3 t=0.1 matrices=100 trials=100
    /// k-values=0,0.005,0.02 l-values=1,2,5 maturity=1].
    Fig3(RunArgs),
    /// Eigenvalue statistics versus expansion contractions
    /// [defaults: n=30 sigma=100 beta=0.01 gamma=3 t=1 matrices=1000].
    #[command(name = "figA1")]
    FigA1(RunArgs),
    /// Variance of the conditional expansion across matrices
    /// [defaults: n=30 sigma=1 beta=0.01 gamma=1 t=0.1 matrices=10000].
    VarianceCheck(RunArgs),
    /// Paired Monte Carlo effect of stochastic volatility, for the chosen
    /// matrix and a sampled antisymmetric one
    /// [defaults: n=10 sigma=1 beta=0.1 gamma=0.5 volvol=0.5 t=0.2 trials=20000 matrix=identity].
    StochvolCheck(RunArgs),
}

/// Options shared by all commands. Unset options fall back to the config
/// file, then to the command's defaults; `seed` defaults to 0 and `dt` to
/// `min(t/500, 0.05/beta)`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with default values for any of the options below.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Number of banks N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Baseline volatility.
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Inverse memory time scale of the recent variation.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Interaction strength.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Volatility of volatility.
    #[arg(long, allow_negative_numbers = true)]
    pub volvol: Option<f64>,
    /// Horizon t.
    #[arg(long = "t", allow_negative_numbers = true)]
    pub t: Option<f64>,
    /// Integration step.
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    /// Monte Carlo trials (per matrix in ensemble sweeps).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Run seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Interaction matrix source.
    #[arg(long, value_enum)]
    pub matrix: Option<MatrixSource>,
    /// Matrix file (implies `--matrix file`).
    #[arg(long, value_name = "PATH")]
    pub matrix_file: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Output format [default: csv; expansion and quadrature: json].
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Worker threads [default: all cores].
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
    /// Pair every trial with a sign-flipped twin.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub antithetic: Option<bool>,
    /// Geometric Brownian volatility in `simulate`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub stochastic_vol: Option<bool>,
    /// Comma-separated gamma grid for fig2.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub gammas: Option<Vec<f64>>,
    /// Number of sampled matrices in ensemble commands.
    #[arg(long)]
    pub matrices: Option<usize>,
    /// Comma-separated spread sensitivities k for fig3.
    #[arg(long, value_delimiter = ',')]
    pub k_values: Option<Vec<f64>>,
    /// Comma-separated exposure caps l for fig3.
    #[arg(long, value_delimiter = ',')]
    pub l_values: Option<Vec<f64>>,
    /// Bond maturity recorded with the fig3 cells.
    #[arg(long, allow_negative_numbers = true)]
    pub maturity: Option<f64>,
    /// Absolute tolerance of the quadrature.
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
}

/// Config-file counterpart of [`RunArgs`].
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    n: Option<usize>,
    sigma: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    volvol: Option<f64>,
    t: Option<f64>,
    dt: Option<f64>,
    trials: Option<usize>,
    seed: Option<u64>,
    matrix: Option<MatrixSource>,
    matrix_file: Option<PathBuf>,
    output: Option<PathBuf>,
    format: Option<OutputFormat>,
    threads: Option<usize>,
    antithetic: Option<bool>,
    stochastic_vol: Option<bool>,
    gammas: Option<Vec<f64>>,
    matrices: Option<usize>,
    k_values: Option<Vec<f64>>,
    l_values: Option<Vec<f64>>,
    maturity: Option<f64>,
    tol: Option<f64>,
}

/// What the run does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Monte Carlo observables.
    Simulate,
    /// Closed-form expansions.
    Expansion,
    /// Quadrature oracle.
    Quadrature,
    /// Gamma sweep.
    Fig2,
    /// Nonlinearity sweep.
    Fig3,
    /// Eigenvalue correlations.
    #[serde(rename = "figA1")]
    FigA1,
    /// Variance law.
    VarianceCheck,
    /// Stochastic volatility check.
    StochvolCheck,
}

impl Command {
    /// Name used on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Expansion => "expansion",
            Command::Quadrature => "quadrature",
            Command::Fig2 => "fig2",
            Command::Fig3 => "fig3",
            Command::FigA1 => "figA1",
            Command::VarianceCheck => "variance-check",
            Command::StochvolCheck => "stochvol-check",
        }
    }

    /// Whether the command works on a single chosen matrix.
    pub fn uses_matrix(self) -> bool {
        matches!(
            self,
            Command::Simulate | Command::Expansion | Command::Quadrature | Command::StochvolCheck
        )
    }

    fn runs_monte_carlo(self) -> bool {
        matches!(
            self,
            Command::Simulate | Command::Fig2 | Command::Fig3 | Command::StochvolCheck
        )
    }
}

/// Where the interaction matrix comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixSource {
    /// I.i.d. standard normal entries drawn from the run seed.
    Gaussian,
    /// Gaussian with the diagonal removed.
    GaussianZeroDiag,
    /// Read from `--matrix-file`.
    File,
    /// Identity matrix.
    Identity,
}

/// Sweep-specific settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    /// Gamma grid (fig2).
    pub gammas: Vec<f64>,
    /// Sampled matrices (ensemble commands).
    pub n_matrices: usize,
    /// Spread sensitivities (fig3).
    pub k_values: Vec<f64>,
    /// Exposure caps (fig3).
    pub l_values: Vec<f64>,
    /// Bond maturity label (fig3).
    pub maturity: f64,
    /// Quadrature tolerance.
    pub tol: f64,
}

/// Fully resolved and validated run description. Serialised into every
/// output file so a run can be repeated from its output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Command.
    pub command: Command,
    /// Model parameters.
    pub params: ModelParams,
    /// Monte Carlo settings.
    pub sim: SimConfig,
    /// Matrix source.
    pub matrix_source: MatrixSource,
    /// Matrix file for [`MatrixSource::File`].
    pub matrix_path: Option<PathBuf>,
    /// Output file; standard output when `None`. Not written to outputs,
    /// so files are identical wherever they are written.
    #[serde(skip)]
    pub output_path: Option<PathBuf>,
    /// Output format.
    pub output_format: OutputFormat,
    /// Sweep settings.
    pub experiment: ExperimentSettings,
    /// Version of the program that produced the run.
    pub version: String,
    /// Worker threads; never written to outputs since results do not
    /// depend on it.
    #[serde(skip)]
    pub threads: Option<usize>,
}

struct Defaults {
    n: usize,
    sigma: f64,
    beta: f64,
    gamma: f64,
    volvol: f64,
    t: f64,
    trials: usize,
    matrix: MatrixSource,
    matrices: usize,
}

fn defaults(cmd: Command) -> Defaults {
    let base = Defaults {
        n: 10,
        sigma: 1.0,
        beta: 0.1,
        gamma: 0.5,
        volvol: 0.0,
        t: 0.2,
        trials: 1000,
        matrix: MatrixSource::Gaussian,
        matrices: 1000,
    };
    match cmd {
        Command::Simulate => Defaults {
            beta: 1.0,
            gamma: 0.0,
            t: 1.0,
            ..base
        },
        Command::Expansion | Command::Quadrature => base,
        Command::Fig2 => Defaults {
            n: 30,
            sigma: 100.0,
            beta: 0.01,
            gamma: 0.5,
            t: 1.0,
            trials: 100,
            ..base
        },
        Command::Fig3 => Defaults {
            n: 30,
            sigma: 100.0,
            beta: 0.01,
            gamma: 3.0,
            t: 0.1,
            trials: 100,
            matrices: 100,
            ..base
        },
        Command::FigA1 => Defaults {
            n: 30,
            sigma: 100.0,
            beta: 0.01,
            gamma: 3.0,
            t: 1.0,
            ..base
        },
        Command::VarianceCheck => Defaults {
            n: 30,
            sigma: 1.0,
            beta: 0.01,
            gamma: 1.0,
            t: 0.1,
            matrices: 10_000,
            ..base
        },
        Command::StochvolCheck => Defaults {
            volvol: 0.5,
            trials: 20_000,
            matrix: MatrixSource::Identity,
            ..base
        },
    }
}

/// Reads and parses a TOML config file.
pub fn load_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| AppError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| AppError::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

fn invalid(e: netstress_core::Error) -> AppError {
    AppError::model("configuration", e)
}

impl CommandArgs {
    fn split(self) -> (Command, RunArgs) {
        match self {
            CommandArgs::Simulate(a) => (Command::Simulate, a),
            CommandArgs::Expansion(a) => (Command::Expansion, a),
            CommandArgs::Quadrature(a) => (Command::Quadrature, a),
            CommandArgs::Fig2(a) => (Command::Fig2, a),
            CommandArgs::Fig3(a) => (Command::Fig3, a),
            CommandArgs::FigA1(a) => (Command::FigA1, a),
            CommandArgs::VarianceCheck(a) => (Command::VarianceCheck, a),
            CommandArgs::StochvolCheck(a) => (Command::StochvolCheck, a),
        }
    }
}

/// Parses `argv` (including the program name) into a run configuration.
///
/// `--help` and `--version` surface as a clap error whose `exit_code` is 0.
pub fn parse_config<I, T>(argv: I) -> std::result::Result<RunConfig, ParseFailure>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(ParseFailure::Clap)?;
    let (command, args) = cli.command.split();
    let file = match &args.config {
        Some(path) => load_file_config(path).map_err(ParseFailure::App)?,
        None => FileConfig::default(),
    };
    resolve(command, args, file).map_err(ParseFailure::App)
}

/// Failure of [`parse_config`].
#[derive(Debug)]
pub enum ParseFailure {
    /// Rejected by the argument parser (also used for `--help`).
    Clap(clap::Error),
    /// Rejected while resolving values.
    App(AppError),
}

/// Merges flags over file values over command defaults and validates.
pub fn resolve(command: Command, args: RunArgs, file: FileConfig) -> Result<RunConfig> {
    let d = defaults(command);
    let matrix_file = args.matrix_file.or(file.matrix_file);
    let matrix_source = match (args.matrix.or(file.matrix), &matrix_file) {
        (Some(MatrixSource::File) | None, Some(_)) => MatrixSource::File,
        (Some(MatrixSource::File), None) => return Err(usage("--matrix file requires --matrix-file")),
        (Some(other), Some(path)) => {
            return Err(usage(format!(
                "conflicting matrix sources: --matrix {} and --matrix-file {}",
                other.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default(),
                path.display()
            )))
        }
        (Some(src), None) => src,
        (None, None) => d.matrix,
    };

    // A matrix file fixes the bank count unless it is given explicitly.
    let n = match (args.n.or(file.n), matrix_source, &matrix_file) {
        (Some(n), _, _) => n,
        (None, MatrixSource::File, Some(path)) if command.uses_matrix() => {
            crate::matrix_io::read_matrix(path)?.rows()
        }
        _ => d.n,
    };
    let sigma = args.sigma.or(file.sigma).unwrap_or(d.sigma);
    let beta = args.beta.or(file.beta).unwrap_or(d.beta);
    let volvol = args.volvol.or(file.volvol).unwrap_or(d.volvol);
    let t = args.t.or(file.t).unwrap_or(d.t);
    let gammas = args
        .gammas
        .or(file.gammas)
        .unwrap_or_else(|| vec![0.5, 1.0, 2.0, 3.0, 4.0]);
    let gamma = match command {
        Command::Fig2 => *gammas.first().ok_or_else(|| usage("--gammas must not be empty"))?,
        _ => args.gamma.or(file.gamma).unwrap_or(d.gamma),
    };
    let params = ModelParams {
        n_banks: n,
        sigma,
        beta,
        gamma,
        volvol,
    };
    params.validate().map_err(invalid)?;
    if command == Command::Fig2 {
        for g in &gammas {
            params.with_gamma(*g).map_err(invalid)?;
        }
    }

    let dt = args.dt.or(file.dt).unwrap_or_else(|| SimConfig::default_dt(t, beta));
    let sim = SimConfig {
        horizon: t,
        dt,
        n_trials: args.trials.or(file.trials).unwrap_or(d.trials),
        seed: args.seed.or(file.seed).unwrap_or(0),
        use_stochastic_vol: match command {
            Command::StochvolCheck => true,
            Command::Simulate => args.stochastic_vol.or(file.stochastic_vol).unwrap_or(false),
            _ => false,
        },
        nonlinear: None,
        antithetic: args.antithetic.or(file.antithetic).unwrap_or(false),
    };
    if command.runs_monte_carlo() {
        sim.validate(&params).map_err(invalid)?;
    } else if !(t.is_finite() && t > 0.0) {
        return Err(invalid(netstress_core::Error::InvalidParameter {
            field: "t",
            reason: format!("must be finite and > 0, got {t}"),
        }));
    }

    let experiment = ExperimentSettings {
        gammas,
        n_matrices: args.matrices.or(file.matrices).unwrap_or(d.matrices),
        k_values: args.k_values.or(file.k_values).unwrap_or_else(|| vec![0.0, 0.005, 0.02]),
        l_values: args.l_values.or(file.l_values).unwrap_or_else(|| vec![1.0, 2.0, 5.0]),
        maturity: args.maturity.or(file.maturity).unwrap_or(1.0),
        tol: args.tol.or(file.tol).unwrap_or(1e-10),
    };
    if !(experiment.tol.is_finite() && experiment.tol > 0.0) {
        return Err(usage(format!("--tol must be > 0, got {}", experiment.tol)));
    }

    let output_format = match (args.format.or(file.format), command) {
        (Some(OutputFormat::Csv), Command::Expansion | Command::Quadrature) => {
            return Err(usage(format!("{} writes JSON only", command.name())))
        }
        (Some(f), _) => f,
        (None, Command::Expansion | Command::Quadrature) => OutputFormat::Json,
        (None, _) => OutputFormat::Csv,
    };

    Ok(RunConfig {
        command,
        params,
        sim,
        matrix_source,
        matrix_path: matrix_file,
        output_path: args.output.or(file.output),
        output_format,
        experiment,
        version: env!("CARGO_PKG_VERSION").to_string(),
        threads: args.threads.or(file.threads),
    })
}
