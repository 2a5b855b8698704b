use std::fmt::Write;

use sier::CvReport;

/// Mean validation errors, one row per pair; the chosen cell is starred.
pub fn error_grid(report: &CvReport) -> String {
    let max_k = report.mean_errors.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::new();
    let _ = write!(
        out,
        "{:>4} {:>8} {:>6} {:>4}",
        "pair", "tau", "lambda", "cap"
    );
    for j in 1..=max_k {
        let _ = write!(out, " {:>11}", format!("k={j}"));
    }
    out.push('\n');
    for (i, (pair, errs)) in report.pairs.iter().zip(&report.mean_errors).enumerate() {
        let _ = write!(
            out,
            "{:>4} {:>8} {:>6} {:>4}",
            i + 1,
            pair.tau,
            pair.lambda,
            report.k_caps[i]
        );
        for (j, e) in errs.iter().enumerate() {
            let mark = if (i, j + 1) == (report.chosen_pair, report.chosen_k) {
                '*'
            } else {
                ' '
            };
            let _ = write!(out, " {:>10.5}{mark}", e);
        }
        out.push('\n');
    }
    out
}
