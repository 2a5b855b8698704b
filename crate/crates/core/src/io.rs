//! File formats: numeric CSV matrices, tuning-grid files, cross-validation
//! reports, and the JSON model file.
//!
//! Numbers are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{PenaltyPair, SignalDecomposition};
use crate::model::{FittedModel, Standardizer};
use crate::numerics::Matrix;
use crate::tuning::CvReport;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_error(line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(std::io::Error::other(e)),
        _ => parse_error(line, 0, e.to_string()),
    }
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes)
}

/// Parses a comma-separated numeric matrix. A first row in which no field is
/// a number is taken as a header and returned separately.
pub fn parse_matrix_csv(bytes: &[u8]) -> Result<(Option<Vec<String>>, Matrix)> {
    let mut header: Option<Vec<String>> = None;
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (idx, record) in reader(bytes).records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if idx == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            header = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(parse_error(
                line,
                record.len().min(expected) + 1,
                format!("expected {expected} fields, found {}", record.len()),
            ));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(line, col + 1, format!("'{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(
                    line,
                    col + 1,
                    format!("non-finite value '{field}'"),
                ));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = match width {
        Some(w) => w,
        None => return Err(parse_error(1, 1, "no data rows")),
    };
    if let Some(h) = &header {
        if h.len() != cols {
            return Err(parse_error(
                1,
                h.len().min(cols) + 1,
                format!("header has {} fields but rows have {cols}", h.len()),
            ));
        }
    }
    Ok((header, Matrix::new(rows, cols, data)?))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    Ok(parse_matrix_csv(&fs::read(path)?)?.1)
}

pub fn matrix_to_csv(m: &Matrix, header: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format_f64(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Tuning pairs from a two-column `tau,lambda` CSV (header optional).
pub fn parse_grid(bytes: &[u8]) -> Result<Vec<PenaltyPair>> {
    let (header, m) = parse_matrix_csv(bytes)?;
    if m.cols() != 2 {
        return Err(parse_error(
            1,
            m.cols().min(2) + 1,
            format!("grid needs 2 columns (tau, lambda), found {}", m.cols()),
        ));
    }
    let offset = 1 + header.is_some() as u64;
    (0..m.rows())
        .map(|i| {
            PenaltyPair::new(m[(i, 0)], m[(i, 1)])
                .map_err(|e| parse_error(i as u64 + offset, 1, e.to_string()))
        })
        .collect()
}

/// Long-format report: one row per `(pair, k)` with the fold errors, their
/// mean and a `chosen` flag. Pairs that yielded no component appear once
/// with empty `k` and error fields.
pub fn cv_report_to_csv(report: &CvReport) -> String {
    let folds = report
        .fold_errors
        .iter()
        .flatten()
        .map(Vec::len)
        .next()
        .unwrap_or(0);
    let mut out = String::from("pair,tau,lambda,k_cap,k,mean_error");
    for l in 1..=folds {
        out.push_str(&format!(",fold_{l}"));
    }
    out.push_str(",chosen\n");
    for (i, pair) in report.pairs.iter().enumerate() {
        let lead = format!(
            "{},{},{},{}",
            i + 1,
            format_f64(pair.tau),
            format_f64(pair.lambda),
            report.k_caps[i]
        );
        if report.k_caps[i] == 0 {
            out.push_str(&format!("{lead},,{}false\n", ",".repeat(folds + 1)));
            continue;
        }
        for j in 0..report.k_caps[i] {
            let chosen = i == report.chosen_pair && j + 1 == report.chosen_k;
            out.push_str(&format!(
                "{lead},{},{}",
                j + 1,
                format_f64(report.mean_errors[i][j])
            ));
            for e in &report.fold_errors[i][j] {
                out.push(',');
                out.push_str(&format_f64(*e));
            }
            out.push_str(if chosen { ",true\n" } else { ",false\n" });
        }
    }
    out
}

/// Reads a report written by [`cv_report_to_csv`]. The fold assignment is
/// not part of the file and comes back empty.
pub fn parse_cv_report(bytes: &[u8]) -> Result<CvReport> {
    let mut rdr = reader(bytes);
    let mut records = rdr.records();
    let head = match records.next() {
        Some(r) => r.map_err(csv_error)?,
        None => return Err(parse_error(1, 1, "empty report")),
    };
    let fixed = ["pair", "tau", "lambda", "k_cap", "k", "mean_error"];
    let width = head.len();
    let folds = width.saturating_sub(fixed.len() + 1);
    let header_ok = width > fixed.len() + 1
        && head.iter().take(6).eq(fixed.iter().copied())
        && (1..=folds).all(|l| head.get(5 + l) == Some(format!("fold_{l}").as_str()))
        && head.get(width - 1) == Some("chosen");
    if !header_ok {
        return Err(parse_error(1, 1, "unrecognized report header"));
    }

    let mut pairs: Vec<PenaltyPair> = Vec::new();
    let mut k_caps: Vec<usize> = Vec::new();
    let mut mean_errors: Vec<Vec<f64>> = Vec::new();
    let mut fold_errors: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut chosen = None;
    for record in records {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_error(
                line,
                record.len().min(width) + 1,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let field = |c: usize| record.get(c).unwrap_or("");
        let int = |c: usize| -> Result<usize> {
            field(c)
                .parse()
                .map_err(|_| parse_error(line, c + 1, format!("'{}' is not a count", field(c))))
        };
        let num = |c: usize| -> Result<f64> {
            let v: f64 = field(c)
                .parse()
                .map_err(|_| parse_error(line, c + 1, format!("'{}' is not a number", field(c))))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_error(line, c + 1, "non-finite value"))
            }
        };
        let pair_idx = int(0)?;
        let k_cap = int(3)?;
        if pair_idx == pairs.len() + 1 {
            let pair = PenaltyPair::new(num(1)?, num(2)?)
                .map_err(|e| parse_error(line, 2, e.to_string()))?;
            pairs.push(pair);
            k_caps.push(k_cap);
            mean_errors.push(Vec::new());
            fold_errors.push(Vec::new());
        } else if pair_idx != pairs.len() || pair_idx == 0 {
            return Err(parse_error(
                line,
                1,
                format!("pair {pair_idx} out of sequence"),
            ));
        }
        let i = pair_idx - 1;
        if k_cap != k_caps[i] || PenaltyPair::new(num(1)?, num(2)?).ok() != Some(pairs[i]) {
            return Err(parse_error(line, 2, "pair fields differ between rows"));
        }
        let is_chosen = match field(width - 1) {
            "true" => true,
            "false" => false,
            other => return Err(parse_error(line, width, format!("'{other}' is not a flag"))),
        };
        if k_cap == 0 {
            if !field(4).is_empty() || is_chosen {
                return Err(parse_error(
                    line,
                    5,
                    "pair without components has a component row",
                ));
            }
            continue;
        }
        let k = int(4)?;
        if k != mean_errors[i].len() + 1 || k > k_cap {
            return Err(parse_error(
                line,
                5,
                format!("component {k} out of sequence"),
            ));
        }
        let mean = num(5)?;
        let errs = (0..folds).map(|l| num(6 + l)).collect::<Result<Vec<_>>>()?;
        if errs.iter().chain([&mean]).any(|e| *e < 0.0) {
            return Err(parse_error(line, 6, "negative validation error"));
        }
        mean_errors[i].push(mean);
        fold_errors[i].push(errs);
        if is_chosen {
            if chosen.is_some() {
                return Err(parse_error(line, width, "more than one chosen cell"));
            }
            chosen = Some((i, k));
        }
    }
    if let Some(i) = (0..pairs.len()).find(|&i| mean_errors[i].len() != k_caps[i]) {
        return Err(parse_error(
            0,
            5,
            format!("pair {} has missing components", i + 1),
        ));
    }
    let (chosen_pair, chosen_k) = chosen.ok_or_else(|| parse_error(0, width, "no chosen cell"))?;
    Ok(CvReport {
        pairs,
        k_caps,
        mean_errors,
        fold_errors,
        chosen_pair,
        chosen_k,
        fold_of: Vec::new(),
    })
}

/// On-disk form of a [`FittedModel`]. `A` has one row per retained predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub p: usize,
    pub q: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub k_opt: usize,
    pub tau: f64,
    pub lambda: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub dropped: Vec<usize>,
    pub y_mean: Vec<f64>,
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn matrix_of(name: &str, rows: &[Vec<f64>], expected: (usize, usize)) -> Result<Matrix> {
    if rows.len() != expected.0 || rows.iter().any(|r| r.len() != expected.1) {
        return Err(Error::ModelFormat(format!(
            "{name} must be {}x{}",
            expected.0, expected.1
        )));
    }
    Matrix::new(expected.0, expected.1, rows.concat())
}

impl From<&FittedModel> for ModelFile {
    fn from(m: &FittedModel) -> Self {
        let s = &m.standardizer;
        ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            p: s.p(),
            q: s.q(),
            k: m.decomposition.k(),
            k_opt: m.k_opt,
            tau: m.tau,
            lambda: m.lambda,
            a: rows_of(&m.decomposition.a),
            w: rows_of(&m.decomposition.w),
            mu: m.decomposition.mu.clone(),
            x_mean: s.x_mean.clone(),
            x_scale: s.x_scale.clone(),
            dropped: s.dropped.clone(),
            y_mean: s.y_mean.clone(),
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<FittedModel> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported schema version {} (expected {MODEL_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.x_mean.len() != self.p || self.y_mean.len() != self.q {
            return Err(Error::ModelFormat(
                "mean vectors disagree with p or q".into(),
            ));
        }
        let all = self
            .x_mean
            .iter()
            .chain(&self.x_scale)
            .chain(&self.y_mean)
            .chain(&self.mu);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::ModelFormat("non-finite statistic".into()));
        }
        if self.dropped.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::ModelFormat(
                "dropped indices must be strictly increasing".into(),
            ));
        }
        let standardizer = Standardizer {
            x_mean: self.x_mean,
            x_scale: self.x_scale,
            y_mean: self.y_mean,
            dropped: self.dropped,
        };
        standardizer.validate()?;
        let retained = standardizer.retained().len();
        let a = matrix_of("A", &self.a, (retained, self.k))?;
        let w = matrix_of("W", &self.w, (self.q, self.k))?;
        if self.mu.len() != self.k {
            return Err(Error::ModelFormat("mu length differs from K".into()));
        }
        if self.k_opt > self.k {
            return Err(Error::ModelFormat(format!(
                "k_opt = {} exceeds K = {}",
                self.k_opt, self.k
            )));
        }
        PenaltyPair::new(self.tau, self.lambda).map_err(|e| Error::ModelFormat(e.to_string()))?;
        Ok(FittedModel {
            standardizer,
            decomposition: SignalDecomposition {
                a,
                w,
                mu: self.mu,
                scores: None,
                converged: vec![true; self.k],
            },
            tau: self.tau,
            lambda: self.lambda,
            k_opt: self.k_opt,
        })
    }
}

pub fn model_to_json(model: &FittedModel) -> String {
    let mut s = serde_json::to_string_pretty(&ModelFile::from(model)).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_json(bytes: &[u8]) -> Result<FittedModel> {
    let file: ModelFile = serde_json::from_slice(bytes).map_err(|e| {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            parse_error(e.line() as u64, e.column(), e.to_string())
        }
    })?;
    file.into_model()
}

pub fn save_model(path: &Path, model: &FittedModel) -> Result<()> {
    write_atomic(path, model_to_json(model).as_bytes())
}

pub fn load_model(path: &Path) -> Result<FittedModel> {
    model_from_json(&fs::read(path)?)
}

/// Writes through a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| {
        Error::InvalidParameter(format!("'{}' is not a file path", path.display()))
    })?;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
