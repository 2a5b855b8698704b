#![no_main]

use libfuzzer_sys::fuzz_target;
use sier::io::{model_from_json, model_to_json};
use sier::Matrix;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = model_from_json(data) {
        let again = model_from_json(model_to_json(&model).as_bytes()).expect("reload");
        let x = Matrix::zeros(1, model.p());
        assert_eq!(model.predict(&x, None).ok(), again.predict(&x, None).ok());
    }
});
