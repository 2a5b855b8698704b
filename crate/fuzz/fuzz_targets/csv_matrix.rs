#![no_main]

use libfuzzer_sys::fuzz_target;
use sier::io::{matrix_to_csv, parse_matrix_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok((header, m)) = parse_matrix_csv(data) {
        // Anything accepted must survive a write/read cycle unchanged.
        let text = matrix_to_csv(&m, header.as_deref());
        if let Ok((_, again)) = parse_matrix_csv(text.as_bytes()) {
            assert_eq!(again, m);
        }
    }
});
