#![no_main]

use libfuzzer_sys::fuzz_target;
use sier::io::parse_grid;

fuzz_target!(|data: &[u8]| {
    if let Ok(pairs) = parse_grid(data) {
        assert!(pairs
            .iter()
            .all(|p| p.tau >= 0.0 && (0.0..1.0).contains(&p.lambda)));
    }
});
