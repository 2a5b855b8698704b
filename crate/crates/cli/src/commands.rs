use std::fs;
use std::path::{Path, PathBuf};

use sier::io::{
    cv_report_to_csv, load_model, matrix_to_csv, model_to_json, parse_cv_report, parse_grid,
    read_matrix, write_atomic,
};
use sier::simulate::{run_figure1, run_study, Case, SimulationSpec};
use sier::tuning::cross_validate;
use sier::{Dataset, Matrix, PenaltyUnits, RandomStream, Scaling, SolverConfig, TuningGrid};

use crate::failure::{CliResult, Failure};
use crate::table::error_grid;
use crate::{ApproxCurveArgs, CvReportArgs, FitArgs, PredictArgs, SimulateArgs, TuningArgs};

fn read_csv(path: &Path) -> CliResult<Matrix> {
    read_matrix(path).map_err(|e| Failure::from(e).in_file(path))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    write_atomic(path, contents.as_bytes()).map_err(|e| Failure::from(e).in_file(path))
}

fn tuning(
    args: &TuningArgs,
    scaling: Scaling,
    units: PenaltyUnits,
) -> CliResult<(TuningGrid, SolverConfig)> {
    let mut grid = TuningGrid {
        threshold: args.threshold,
        folds: args.folds,
        scaling: args.scaling.unwrap_or(scaling),
        units: args.penalty_units.unwrap_or(units),
        ..TuningGrid::default()
    };
    if let Some(path) = &args.grid {
        let bytes =
            fs::read(path).map_err(|e| Failure::from(sier::Error::from(e)).in_file(path))?;
        grid.pairs = parse_grid(&bytes).map_err(|e| Failure::from(e).in_file(path))?;
    }
    let cfg = SolverConfig {
        max_outer_iters: args.max_iter,
        tol: args.tol,
        restarts: args.restarts,
        ..SolverConfig::default()
    };
    grid.validate()?;
    cfg.validate()?;
    Ok((grid, cfg))
}

fn default_report_path(model: &Path) -> PathBuf {
    model.with_extension("cv.csv")
}

pub fn fit(a: FitArgs) -> CliResult<()> {
    let (grid, cfg) = tuning(&a.tuning, Scaling::UnitVariance, PenaltyUnits::Moment)?;
    let x = read_csv(&a.x)?;
    let y = read_csv(&a.y)?;
    if x.rows() != y.rows() {
        return Err(Failure::data(format!(
            "row count mismatch: {} has {} rows but {} has {} rows",
            a.x.display(),
            x.rows(),
            a.y.display(),
            y.rows()
        )));
    }
    let data = Dataset::new(x, y)?;
    let (model, report) = cross_validate(&data, &grid, &cfg, &RandomStream::new(a.seed, 0))?;
    write_file(&a.out, &model_to_json(&model))?;
    let report_path = a.report.unwrap_or_else(|| default_report_path(&a.out));
    write_file(&report_path, &cv_report_to_csv(&report))?;

    println!(
        "chosen tau = {}, lambda = {}, k_opt = {} (mean validation error {:.6})",
        model.tau,
        model.lambda,
        model.k_opt,
        report.chosen_error()
    );
    print!("{}", error_grid(&report));
    println!("model written to {}", a.out.display());
    println!(
        "cross-validation report written to {}",
        report_path.display()
    );
    Ok(())
}

pub fn predict(a: PredictArgs) -> CliResult<()> {
    let model = load_model(&a.model).map_err(|e| Failure::from(e).in_file(&a.model))?;
    let x = read_csv(&a.x)?;
    if x.cols() != model.p() {
        return Err(Failure::data(format!(
            "column count mismatch: {} has {} columns but the model expects {}",
            a.x.display(),
            x.cols(),
            model.p()
        )));
    }
    let pred = model.predict(&x, a.k)?;
    write_file(&a.out, &matrix_to_csv(&pred, None))?;
    Ok(())
}

pub fn cv_report(a: CvReportArgs) -> CliResult<()> {
    let bytes =
        fs::read(&a.report).map_err(|e| Failure::from(sier::Error::from(e)).in_file(&a.report))?;
    let report = parse_cv_report(&bytes).map_err(|e| Failure::from(e).in_file(&a.report))?;
    let pair = report.pairs[report.chosen_pair];
    println!(
        "chosen pair {} (tau = {}, lambda = {}), k_opt = {}, mean validation error {:.6}",
        report.chosen_pair + 1,
        pair.tau,
        pair.lambda,
        report.chosen_k,
        report.chosen_error()
    );
    print!("{}", error_grid(&report));
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let mut spec = SimulationSpec::for_case(a.case);
    if a.case == Case::Three && a.rho.is_none() {
        eprintln!(
            "warning: case 3 has no fixed predictor correlation; using rho = {}",
            spec.rho
        );
    }
    macro_rules! set {
        ($($field:ident <- $arg:expr),*) => {
            $(if let Some(v) = $arg { spec.$field = v; })*
        };
    }
    set!(
        reps <- a.reps,
        rho <- a.rho,
        r <- a.r,
        sigma2_total <- a.sigma2,
        p <- a.p,
        q <- a.q,
        p0 <- a.p0,
        gamma <- a.gamma,
        n_train <- a.n_train,
        n_test <- a.n_test
    );
    spec.seed = a.seed;
    spec.validate()?;

    if spec.case == Case::Figure1 {
        let curve = run_figure1(&spec)?;
        write_file(&a.out, &curve.to_csv())?;
        if let (Some(s), Some(v)) = (curve.sier.first(), curve.svd.first()) {
            println!(
                "figure1 reps {}: relative error at k = 1: {:.4} (signal decomposition) vs {:.4} (SVD of B)",
                spec.reps, s, v
            );
        }
        return Ok(());
    }
    let (grid, cfg) = tuning(&a.tuning, Scaling::CenterOnly, PenaltyUnits::Gram)?;
    let study = run_study(&spec, &grid, &cfg)?;
    write_file(&a.out, &study.to_csv()?)?;
    println!("{}", study.summary_line());
    Ok(())
}

pub fn approx_curve(a: ApproxCurveArgs) -> CliResult<()> {
    let spec = SimulationSpec {
        reps: 1,
        seed: a.seed,
        ..SimulationSpec::figure1()
    };
    let curve = run_figure1(&spec)?;
    write_file(&a.out, &curve.to_csv())?;
    Ok(())
}
