#![no_main]

use libfuzzer_sys::fuzz_target;
use sier::io::{cv_report_to_csv, parse_cv_report};

fuzz_target!(|data: &[u8]| {
    if let Ok(report) = parse_cv_report(data) {
        let again = parse_cv_report(cv_report_to_csv(&report).as_bytes()).expect("reparse");
        assert_eq!(again, report);
    }
});
