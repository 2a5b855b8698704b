//! `sier` command-line interface.

mod commands;
mod failure;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sier::simulate::Case;
use sier::{PenaltyUnits, Scaling};

#[derive(Debug, Parser)]
#[command(
    name = "sier",
    version,
    about = "Signal-extraction multivariate regression"
)]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "SIER_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cross-validate the tuning grid and fit a model.
    Fit(FitArgs),
    /// Predict responses with a saved model.
    Predict(PredictArgs),
    /// Print the error grid of a saved cross-validation report.
    CvReport(CvReportArgs),
    /// Run a replicate study of a simulation design.
    Simulate(SimulateArgs),
    /// Relative low-rank approximation errors of one approximation-study draw.
    ApproxCurve(ApproxCurveArgs),
}

/// Tuning and solver options shared by `fit` and `simulate`.
#[derive(Debug, Args)]
struct TuningArgs {
    /// CSV of `tau,lambda` pairs replacing the default grid.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Signal-fraction cutoff of the component cap.
    #[arg(long, default_value_t = sier::tuning::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = sier::tuning::DEFAULT_FOLDS)]
    folds: usize,
    /// Predictor scaling: unit-variance or center-only [default: unit-variance
    /// for fit, center-only for simulate].
    #[arg(long)]
    scaling: Option<Scaling>,
    /// Reference of the grid's tau values: moment (X'X/n) or gram (X'X)
    /// [default: moment for fit, gram for simulate].
    #[arg(long)]
    penalty_units: Option<PenaltyUnits>,
    /// Largest number of outer solver iterations per component.
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Relative objective change that ends the solver.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Perturbed restarts per component.
    #[arg(long, default_value_t = 3)]
    restarts: usize,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Predictor CSV (n rows, p columns).
    x: PathBuf,
    /// Response CSV (n rows, q columns).
    y: PathBuf,
    /// Model file to write.
    out: PathBuf,
    /// Cross-validation report path [default: <out> with extension cv.csv].
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Debug, Args)]
struct PredictArgs {
    model: PathBuf,
    /// Predictor CSV with the training column layout.
    x: PathBuf,
    /// Prediction CSV to write.
    out: PathBuf,
    /// Component count [default: the model's k_opt].
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
struct CvReportArgs {
    report: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// 1, 2, 3 or figure1.
    #[arg(long)]
    case: Case,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Predictor correlation.
    #[arg(long)]
    rho: Option<f64>,
    /// Noise correlation.
    #[arg(long)]
    r: Option<f64>,
    /// Total noise variance q·sigma².
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    /// Number of leading signal predictors.
    #[arg(long)]
    p0: Option<usize>,
    /// Smoothness exponent of the case-3 response loadings.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Result CSV to write.
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Debug, Args)]
struct ApproxCurveArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Curve CSV to write.
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(failure::USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(failure::USAGE);
        }
    }
    let outcome = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::CvReport(a) => commands::cv_report(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::ApproxCurve(a) => commands::approx_curve(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
