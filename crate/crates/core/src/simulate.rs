//! Data generators for the benchmark designs, evaluation metrics, and a
//! replicate runner.
//!
//! Every generator draws from the stream it is handed and nothing else, so
//! a replicate is reproduced exactly from `(seed, replicate index)` whether
//! it runs alone or inside a batch.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{
    coefficient_matrix, population_decomposition, SignalDecomposition, SolverConfig,
};
use crate::io::format_f64;
use crate::model::{Dataset, SELECTION_TOL};
use crate::numerics::{
    cholesky_factor, sample_ar1, sample_compound, sample_mvn, thin_svd, Matrix, RandomStream,
};
use crate::tuning::{cross_validate, TuningGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    One,
    Two,
    Three,
    Figure1,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::One => "1",
            Case::Two => "2",
            Case::Three => "3",
            Case::Figure1 => "figure1",
        })
    }
}

impl std::str::FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Case::One),
            "2" => Ok(Case::Two),
            "3" => Ok(Case::Three),
            "figure1" => Ok(Case::Figure1),
            other => Err(Error::InvalidParameter(format!(
                "unknown case '{other}' (expected 1, 2, 3 or figure1)"
            ))),
        }
    }
}

/// Full parameterization of one simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub case: Case,
    pub p: usize,
    pub q: usize,
    /// Rank of the coefficient matrix.
    pub k: usize,
    /// Number of leading predictors carrying signal (factor designs).
    pub p0: usize,
    pub rho: f64,
    /// Off-diagonal noise correlation.
    pub r: f64,
    /// Total noise variance `qσ²`.
    pub sigma2_total: f64,
    /// Smoothness exponent of the Case-3 response-loading covariance.
    pub gamma: f64,
    /// Training rows (the sample size for the approximation study).
    pub n_train: usize,
    pub n_test: usize,
    pub reps: usize,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn case1() -> Self {
        Self {
            case: Case::One,
            p: 500,
            q: 3,
            k: 3,
            p0: 105,
            rho: 0.3,
            r: 0.2,
            sigma2_total: 0.1,
            gamma: 1.0,
            n_train: 90,
            n_test: 500,
            reps: 50,
            seed: 1,
        }
    }

    pub fn case2() -> Self {
        Self {
            case: Case::Two,
            p: 100,
            q: 20,
            k: 3,
            p0: 40,
            rho: 0.3,
            r: 0.0,
            sigma2_total: 0.015,
            ..Self::case1()
        }
    }

    /// Case 3 with `ρ = 0.7`. The design leaves the predictor correlation
    /// open, so this is only a default.
    pub fn case3() -> Self {
        Self {
            case: Case::Three,
            p: 1000,
            q: 100,
            k: 3,
            p0: 100,
            rho: 0.7,
            r: 0.5,
            sigma2_total: 0.15,
            ..Self::case1()
        }
    }

    pub fn figure1() -> Self {
        Self {
            case: Case::Figure1,
            p: 1000,
            q: 100,
            k: 25,
            p0: 40,
            rho: 0.7,
            r: 0.0,
            sigma2_total: 0.0,
            n_train: 100,
            n_test: 0,
            reps: 100,
            ..Self::case1()
        }
    }

    pub fn for_case(case: Case) -> Self {
        match case {
            Case::One => Self::case1(),
            Case::Two => Self::case2(),
            Case::Three => Self::case3(),
            Case::Figure1 => Self::figure1(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self.case {
            Case::One if (self.p, self.q, self.k) != (500, 3, 3) => {
                return bad(format!(
                    "case 1 fixes p = 500, q = 3, K = 3 (got p = {}, q = {}, K = {})",
                    self.p, self.q, self.k
                ))
            }
            Case::Two | Case::Three if self.k != 3 => {
                return bad(format!("case {} fixes K = 3, got {}", self.case, self.k))
            }
            _ => {}
        }
        if self.p == 0 || self.q == 0 || self.k == 0 {
            return bad("p, q and K must be positive".into());
        }
        if self.case != Case::One && !(1..=self.p).contains(&self.p0) {
            return bad(format!("p0 = {} must lie in 1..={}", self.p0, self.p));
        }
        if !(self.rho.abs() < 1.0) {
            return bad(format!("rho must lie in (-1, 1), got {}", self.rho));
        }
        if !(self.r.abs() < 1.0) {
            return bad(format!("r must lie in (-1, 1), got {}", self.r));
        }
        if !(self.sigma2_total >= 0.0 && self.sigma2_total.is_finite()) {
            return bad(format!(
                "noise level must be >= 0, got {}",
                self.sigma2_total
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be > 0, got {}", self.gamma));
        }
        if self.n_train < 2 {
            return bad(format!(
                "need at least 2 training rows, got {}",
                self.n_train
            ));
        }
        if self.case != Case::Figure1 && self.n_test == 0 {
            return bad("need at least 1 test row".into());
        }
        if self.reps == 0 {
            return bad("reps must be positive".into());
        }
        Ok(())
    }
}

/// The generating coefficient matrix and what it implies for one replicate.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub b_true: Matrix,
    /// Indices of the nonzero rows of `b_true`.
    pub support: BTreeSet<usize>,
    /// Exact decomposition of `b_true` on the realized training predictors.
    pub components: SignalDecomposition,
}

/// A generated replicate.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub train: Dataset,
    pub test: Dataset,
    pub truth: GroundTruth,
}

pub fn support_of(b: &Matrix) -> BTreeSet<usize> {
    (0..b.rows())
        .filter(|&j| b.row(j).iter().any(|v| *v != 0.0))
        .collect()
}

/// Independent `N(0, 0.1²)` columns.
fn small_noise_columns(n: usize, cols: usize, rs: &mut RandomStream) -> Matrix {
    Matrix::from_fn(n, cols, |_, _| 0.1 * rs.standard_normal())
}

/// Draws noise, builds `Y = XB + ε`, and splits the rows.
fn realize(
    x: Matrix,
    b: Matrix,
    r: f64,
    sigma2_total: f64,
    n_train: usize,
    rs: &mut RandomStream,
) -> Result<Replicate> {
    let (n, q) = (x.rows(), b.cols());
    let sd = (sigma2_total / q as f64).sqrt();
    let noise = sample_compound(r, q, rs, n)?.scale(sd);
    let y = x.matmul(&b)?.add(&noise)?;
    let train_rows: Vec<usize> = (0..n_train).collect();
    let test_rows: Vec<usize> = (n_train..n).collect();
    let train = Dataset::new(x.select_rows(&train_rows), y.select_rows(&train_rows))?;
    let test = Dataset {
        x: x.select_rows(&test_rows),
        y: y.select_rows(&test_rows),
    };
    let components = population_decomposition(&train.x, &b)?;
    Ok(Replicate {
        train,
        test,
        truth: GroundTruth {
            support: support_of(&b),
            b_true: b,
            components,
        },
    })
}

pub fn case1_coefficients() -> Matrix {
    let mut b = Matrix::zeros(500, 3);
    let blocks = [
        (0..15, 1.0, 15.0),
        (15..45, 0.5, 30.0),
        (45..105, 0.25, 60.0),
    ];
    for (col, (rows, height, len)) in blocks.into_iter().enumerate() {
        for j in rows {
            b[(j, col)] = height / f64::sqrt(len);
        }
    }
    b
}

/// Case 1: fixed sparse `B` (500×3), AR(1) correlation over the first 150
/// predictors, weak independent noise columns elsewhere.
pub fn gen_case1(
    rho: f64,
    r: f64,
    sigma2_total: f64,
    n_train: usize,
    n_test: usize,
    rs: &mut RandomStream,
) -> Result<Replicate> {
    let n = n_train + n_test;
    let x = sample_ar1(rho, 150, rs, n)?.hstack(&small_noise_columns(n, 350, rs))?;
    realize(x, case1_coefficients(), r, sigma2_total, n_train, rs)
}

/// `C` (p×k): first `p0` rows standard normal, the rest zero, then every
/// column scaled to unit norm.
fn sparse_unit_columns(p: usize, k: usize, p0: usize, rs: &mut RandomStream) -> Matrix {
    let mut c = Matrix::from_fn(p, k, |j, _| if j < p0 { rs.standard_normal() } else { 0.0 });
    for col in 0..k {
        let v = c.column(col);
        let norm = crate::numerics::norm2(&v);
        let scaled: Vec<f64> = v.iter().map(|x| x / norm).collect();
        c.set_column(col, &scaled);
    }
    c
}

fn unit_rows(mut d: Matrix) -> Matrix {
    for i in 0..d.rows() {
        let norm = crate::numerics::norm2(d.row(i));
        d.row_mut(i).iter_mut().for_each(|v| *v /= norm);
    }
    d
}

/// Case 2: `B = CD` of rank 3 with `C` supported on the first `p0` rows;
/// compound-symmetric correlation over the first 50 predictors.
#[allow(clippy::too_many_arguments)]
pub fn gen_case2(
    p: usize,
    q: usize,
    p0: usize,
    rho: f64,
    r: f64,
    sigma2_total: f64,
    n_train: usize,
    n_test: usize,
    rs: &mut RandomStream,
) -> Result<Replicate> {
    let n = n_train + n_test;
    let c = sparse_unit_columns(p, 3, p0, rs);
    let d = unit_rows(Matrix::from_fn(3, q, |_, _| rs.uniform(-1.0, 1.0)));
    let b = c.matmul(&d)?;
    let block = p.min(50);
    let x = sample_compound(rho, block, rs, n)?.hstack(&small_noise_columns(n, p - block, rs))?;
    realize(x, b, r, sigma2_total, n_train, rs)
}

/// `Σ_D(i, j) = exp(−(|i − j|/100)^γ)`.
pub fn response_loading_covariance(q: usize, gamma: f64) -> Matrix {
    Matrix::from_fn(q, q, |i, j| {
        let d = (i as f64 - j as f64).abs() / 100.0;
        (-d.powf(gamma)).exp()
    })
}

/// Case 3: as Case 2 but with smooth response loadings drawn from
/// `N_q(0, Σ_D)`, an AR(1) block over the first 200 predictors, `qσ² = 0.15`
/// and noise correlation 0.5.
#[allow(clippy::too_many_arguments)]
pub fn gen_case3(
    p: usize,
    q: usize,
    p0: usize,
    gamma: f64,
    rho: f64,
    n_train: usize,
    n_test: usize,
    rs: &mut RandomStream,
) -> Result<Replicate> {
    let n = n_train + n_test;
    let c = sparse_unit_columns(p, 3, p0, rs);
    let chol = cholesky_factor(&response_loading_covariance(q, gamma))?;
    let d = unit_rows(sample_mvn(&vec![0.0; q], &chol, rs, 3)?);
    let b = c.matmul(&d)?;
    let block = p.min(200);
    let x = sample_ar1(rho, block, rs, n)?.hstack(&small_noise_columns(n, p - block, rs))?;
    realize(x, b, 0.5, 0.15, n_train, rs)
}

/// Low-rank approximation instance: compound-symmetric `X` (n×p, correlation
/// `rho`) and `B = CD` with `C` (p×k) standard normal on the first `p0` rows
/// and `D` (k×q) uniform on (−1, 1), neither rescaled.
pub fn gen_figure1(
    n: usize,
    p: usize,
    q: usize,
    k: usize,
    p0: usize,
    rho: f64,
    rs: &mut RandomStream,
) -> Result<(Matrix, Matrix)> {
    let x = sample_compound(rho, p, rs, n)?;
    let c = Matrix::from_fn(p, k, |j, _| if j < p0 { rs.standard_normal() } else { 0.0 });
    let d = Matrix::from_fn(k, q, |_, _| rs.uniform(-1.0, 1.0));
    Ok((x, c.matmul(&d)?))
}

/// Relative errors `‖XB − XB_k‖²_F / ‖XB‖²_F` for `k = 1..=rank(B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxCurve {
    /// Prefixes of the signal decomposition of `B`.
    pub sier: Vec<f64>,
    /// Prefixes of the SVD of `B` itself.
    pub svd: Vec<f64>,
}

pub fn approx_error_curve(x: &Matrix, b: &Matrix) -> Result<ApproxCurve> {
    let signal = x.matmul(b)?;
    let total = signal.frobenius_sq();
    if b.max_abs() == 0.0 || total == 0.0 {
        return Err(Error::InvalidParameter(
            "approximation curve needs a nonzero signal".into(),
        ));
    }
    let svd = thin_svd(b)?;
    let rank = svd.numerical_rank(crate::extractor::RANK_CUTOFF);
    let dec = population_decomposition(x, b)?;
    let rel =
        |bk: &Matrix| -> Result<f64> { Ok(signal.sub(&x.matmul(bk)?)?.frobenius_sq() / total) };
    let (p, q) = b.shape();
    let mut sier = Vec::with_capacity(rank);
    let mut by_svd = Vec::with_capacity(rank);
    let mut b_svd = Matrix::zeros(p, q);
    for k in 1..=rank {
        sier.push(rel(&coefficient_matrix(&dec, k.min(dec.k()))?)?);
        let s = svd.singular_values[k - 1];
        let (u, v) = (svd.u.column(k - 1), svd.v.column(k - 1));
        for j in 0..p {
            let c = s * u[j];
            b_svd
                .row_mut(j)
                .iter_mut()
                .zip(&v)
                .for_each(|(e, vi)| *e += c * vi);
        }
        by_svd.push(rel(&b_svd)?);
    }
    Ok(ApproxCurve { sier, svd: by_svd })
}

/// Approximation curves of one approximation-study draw.
pub fn figure1_replicate(spec: &SimulationSpec, index: usize) -> Result<ApproxCurve> {
    spec.validate()?;
    let mut rs = replicate_stream(spec.seed, index).substream(0);
    let (x, b) = gen_figure1(
        spec.n_train,
        spec.p,
        spec.q,
        spec.k,
        spec.p0,
        spec.rho,
        &mut rs,
    )?;
    approx_error_curve(&x, &b)
}

/// Pointwise mean of the approximation curves over `spec.reps` draws.
pub fn run_figure1(spec: &SimulationSpec) -> Result<ApproxCurve> {
    spec.validate()?;
    if spec.case != Case::Figure1 {
        return Err(Error::InvalidParameter(format!(
            "case {} is a replicate study, not an approximation study",
            spec.case
        )));
    }
    let curves = (0..spec.reps)
        .into_par_iter()
        .map(|i| figure1_replicate(spec, i))
        .collect::<Result<Vec<_>>>()?;
    let len = curves[0].sier.len();
    if curves.iter().any(|c| c.sier.len() != len) {
        return Err(Error::Consistency(
            "coefficient rank differs between draws".into(),
        ));
    }
    let reps = curves.len() as f64;
    let mean = |pick: fn(&ApproxCurve) -> &Vec<f64>| -> Vec<f64> {
        (0..len)
            .map(|k| curves.iter().map(|c| pick(c)[k]).sum::<f64>() / reps)
            .collect()
    };
    Ok(ApproxCurve {
        sier: mean(|c| &c.sier),
        svd: mean(|c| &c.svd),
    })
}

impl ApproxCurve {
    /// `k,err_sier,err_svd` rows, `k` from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,err_sier,err_svd\n");
        for (k, (a, b)) in self.sier.iter().zip(&self.svd).enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                k + 1,
                format_f64(*a),
                format_f64(*b)
            ));
        }
        out
    }
}

/// `‖Y_test − Y_pred‖²_F / n_test`.
pub fn mspe(y_test: &Matrix, y_pred: &Matrix) -> Result<f64> {
    if y_test.shape() != y_pred.shape() {
        return Err(Error::DimensionMismatch {
            context: "prediction error",
            expected: y_test.shape(),
            got: y_pred.shape(),
        });
    }
    Ok(y_test.sub(y_pred)?.frobenius_sq() / y_test.rows() as f64)
}

/// Sensitivity and specificity of a selected predictor set. Either is `None`
/// when its reference set is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionMetrics {
    pub se: Option<f64>,
    pub sp: Option<f64>,
}

pub fn selection_metrics(
    selected: &BTreeSet<usize>,
    support: &BTreeSet<usize>,
    p: usize,
) -> Result<SelectionMetrics> {
    if let Some(&j) = selected.iter().chain(support).find(|&&j| j >= p) {
        return Err(Error::InvalidParameter(format!(
            "predictor index {j} outside 0..{p}"
        )));
    }
    let hits = selected.intersection(support).count();
    let null = p - support.len();
    let false_pos = selected.len() - hits;
    Ok(SelectionMetrics {
        se: (!support.is_empty()).then(|| hits as f64 / support.len() as f64),
        sp: (null > 0).then(|| (null - false_pos) as f64 / null as f64),
    })
}

/// Draws replicate `index` of a study.
pub fn generate(spec: &SimulationSpec, rs: &mut RandomStream) -> Result<Replicate> {
    spec.validate()?;
    let s = spec;
    match s.case {
        Case::One => gen_case1(s.rho, s.r, s.sigma2_total, s.n_train, s.n_test, rs),
        Case::Two => gen_case2(
            s.p,
            s.q,
            s.p0,
            s.rho,
            s.r,
            s.sigma2_total,
            s.n_train,
            s.n_test,
            rs,
        ),
        Case::Three => gen_case3(s.p, s.q, s.p0, s.gamma, s.rho, s.n_train, s.n_test, rs),
        Case::Figure1 => Err(Error::InvalidParameter(
            "the figure1 design has no train/test split; use approx_error_curve".into(),
        )),
    }
}

/// Stream of replicate `index` under `seed`.
pub fn replicate_stream(seed: u64, index: usize) -> RandomStream {
    RandomStream::new(seed, 0).substream(index as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub index: usize,
    pub mspe: f64,
    pub k_opt: usize,
    pub se: Option<f64>,
    pub sp: Option<f64>,
    pub n_selected: usize,
    pub tau: f64,
    pub lambda: f64,
}

/// Mean and sample standard deviation; `None` without observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Summary> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Summary { mean, sd })
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}({:.3})", self.mean, self.sd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub spec: SimulationSpec,
    /// Ordered by replicate index.
    pub replicates: Vec<ReplicateResult>,
}

impl StudyResult {
    pub fn mspe(&self) -> Option<Summary> {
        Summary::of(self.replicates.iter().map(|r| r.mspe))
    }

    pub fn k_opt(&self) -> Option<Summary> {
        Summary::of(self.replicates.iter().map(|r| r.k_opt as f64))
    }

    pub fn se(&self) -> Option<Summary> {
        Summary::of(self.replicates.iter().filter_map(|r| r.se))
    }

    pub fn sp(&self) -> Option<Summary> {
        Summary::of(self.replicates.iter().filter_map(|r| r.sp))
    }

    pub fn n_selected(&self) -> Option<Summary> {
        Summary::of(self.replicates.iter().map(|r| r.n_selected as f64))
    }

    /// One `mean(sd)` summary line.
    pub fn summary_line(&self) -> String {
        let show = |s: Option<Summary>| s.map_or_else(|| "NA".to_string(), |s| s.to_string());
        format!(
            "case {} reps {}: MSPE {}  K {}  Se {}  Sp {}",
            self.spec.case,
            self.replicates.len(),
            show(self.mspe()),
            show(self.k_opt()),
            show(self.se()),
            show(self.sp()),
        )
    }

    /// Per-replicate rows followed by `mean` and `sd` rows flagged `agg=true`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = [
            "replicate",
            "agg",
            "mspe",
            "k_opt",
            "se",
            "sp",
            "n_selected",
            "tau",
            "lambda",
        ];
        w.write_record(header).map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
        for r in &self.replicates {
            w.write_record([
                r.index.to_string(),
                "false".into(),
                format_f64(r.mspe),
                r.k_opt.to_string(),
                opt(r.se),
                opt(r.sp),
                r.n_selected.to_string(),
                format_f64(r.tau),
                format_f64(r.lambda),
            ])
            .map_err(csv_err)?;
        }
        let stats = [
            self.mspe(),
            self.k_opt(),
            self.se(),
            self.sp(),
            self.n_selected(),
        ];
        for (label, pick) in [("mean", 0), ("sd", 1)] {
            let mut row = vec![label.to_string(), "true".into()];
            for s in stats {
                row.push(opt(s.map(|s| if pick == 0 { s.mean } else { s.sd })));
            }
            row.extend([String::new(), String::new()]);
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Runs one replicate: generate, cross-validate on the training rows,
/// predict the test rows, score selection against the truth.
pub fn run_replicate(
    spec: &SimulationSpec,
    grid: &TuningGrid,
    cfg: &SolverConfig,
    index: usize,
) -> Result<ReplicateResult> {
    let stream = replicate_stream(spec.seed, index);
    let rep = generate(spec, &mut stream.substream(0))?;
    let (model, _) = cross_validate(&rep.train, grid, cfg, &stream.substream(1))?;
    let pred = model.predict(&rep.test.x, None)?;
    let selected = model.selected_features(SELECTION_TOL);
    let metrics = selection_metrics(&selected, &rep.truth.support, spec.p)?;
    Ok(ReplicateResult {
        index,
        mspe: mspe(&rep.test.y, &pred)?,
        k_opt: model.k_opt,
        se: metrics.se,
        sp: metrics.sp,
        n_selected: selected.len(),
        tau: model.tau,
        lambda: model.lambda,
    })
}

/// All replicates of `spec`, in parallel, collected in replicate order.
pub fn run_study(
    spec: &SimulationSpec,
    grid: &TuningGrid,
    cfg: &SolverConfig,
) -> Result<StudyResult> {
    spec.validate()?;
    if spec.case == Case::Figure1 {
        return Err(Error::InvalidParameter(
            "the figure1 design is an approximation study, not a replicate study".into(),
        ));
    }
    let replicates = (0..spec.reps)
        .into_par_iter()
        .map(|i| run_replicate(spec, grid, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyResult {
        spec: spec.clone(),
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case1_coefficients_layout() {
        let b = case1_coefficients();
        assert!((b[(0, 0)] - 0.258_198_889_747_161_1).abs() < 1e-15);
        assert_eq!(b[(14, 0)], b[(0, 0)]);
        assert_eq!(b[(15, 0)], 0.0);
        assert_eq!(b[(15, 1)], 0.5 / 30f64.sqrt());
        assert_eq!(b[(104, 2)], 0.25 / 60f64.sqrt());
        assert_eq!(b[(105, 2)], 0.0);
        assert_eq!(support_of(&b).len(), 105);
    }

    #[test]
    fn case1_shapes_and_replay() {
        let run = || gen_case1(0.3, 0.2, 0.1, 90, 20, &mut RandomStream::new(5, 0)).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.train.x.shape(), (90, 500));
        assert_eq!(a.test.y.shape(), (20, 3));
        assert_eq!(a.train.x, b.train.x);
        assert_eq!(a.test.y, b.test.y);
    }

    #[test]
    fn case2_structure() {
        let mut rs = RandomStream::new(6, 0);
        let rep = gen_case2(100, 20, 40, 0.3, 0.0, 0.015, 30, 10, &mut rs).unwrap();
        let b = &rep.truth.b_true;
        assert!(rep.truth.support.iter().all(|&j| j < 40));
        assert_eq!(rep.truth.support, support_of(b));
        let s = thin_svd(b).unwrap().singular_values;
        assert!(s[2] > 1e-8 && s[3] < 1e-10 * s[0]);
    }

    #[test]
    fn factor_normalizations() {
        let mut rs = RandomStream::new(7, 0);
        let c = sparse_unit_columns(60, 3, 40, &mut rs);
        for col in 0..3 {
            assert!((crate::numerics::norm2(&c.column(col)) - 1.0).abs() < 1e-12);
        }
        let chol = cholesky_factor(&response_loading_covariance(50, 2.0)).unwrap();
        let d = unit_rows(sample_mvn(&[0.0; 50], &chol, &mut rs, 3).unwrap());
        for i in 0..3 {
            assert!((crate::numerics::norm2(d.row(i)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loading_covariance_entries() {
        let s = response_loading_covariance(120, 1.0);
        assert_eq!(s[(0, 100)], (-1.0f64).exp());
        assert!((0..120).all(|i| s[(i, i)] == 1.0));
    }

    #[test]
    fn figure1_shapes() {
        let mut rs = RandomStream::new(8, 0);
        let (x, b) = gen_figure1(30, 60, 12, 5, 40, 0.7, &mut rs).unwrap();
        assert_eq!(x.shape(), (30, 60));
        assert_eq!(b.shape(), (60, 12));
        assert!(support_of(&b).iter().all(|&j| j < 40));
    }

    #[test]
    fn mspe_cases() {
        let y = Matrix::from_fn(4, 2, |i, j| (i + j) as f64);
        assert_eq!(mspe(&y, &y).unwrap(), 0.0);
        let mut off = y.clone();
        off[(1, 1)] += 2.0;
        assert_eq!(mspe(&y, &off).unwrap(), 1.0);
        assert!(mspe(&y, &Matrix::zeros(4, 1)).is_err());
    }

    #[test]
    fn selection_cases() {
        let support: BTreeSet<usize> = [0, 1, 2].into();
        let m = selection_metrics(&support, &support, 10).unwrap();
        assert_eq!((m.se, m.sp), (Some(1.0), Some(1.0)));
        let m = selection_metrics(&BTreeSet::new(), &support, 10).unwrap();
        assert_eq!((m.se, m.sp), (Some(0.0), Some(1.0)));
        let m = selection_metrics(&[5].into(), &BTreeSet::new(), 10).unwrap();
        assert_eq!((m.se, m.sp), (None, Some(0.9)));
        assert!(selection_metrics(&[10].into(), &support, 10).is_err());
    }

    #[test]
    fn summary_single_and_pair() {
        let s = Summary::of([0.3]).unwrap();
        assert_eq!((s.mean, s.sd), (0.3, 0.0));
        let s = Summary::of([1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.sd), (2.0, 2f64.sqrt()));
        assert_eq!(s.to_string(), "2.000(1.414)");
        assert!(Summary::of([]).is_none());
    }

    #[test]
    fn spec_domains() {
        assert!(SimulationSpec::case1().validate().is_ok());
        assert!(SimulationSpec::case3().validate().is_ok());
        let mut s = SimulationSpec::case1();
        s.p = 400;
        assert!(s.validate().is_err());
        let mut s = SimulationSpec::case2();
        s.rho = 1.0;
        assert!(s.validate().is_err());
        assert!("4".parse::<Case>().is_err());
        assert_eq!("figure1".parse::<Case>().unwrap(), Case::Figure1);
    }
}
