#![no_main]

use libfuzzer_sys::fuzz_target;
use matprod_core::config::{format_matrix_literal, parse_matrix_literal};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = parse_matrix_literal(text) {
        assert!(m.is_finite());
        assert_eq!(parse_matrix_literal(&format_matrix_literal(&m)).unwrap(), m);
    }
});
