#![no_main]

use clinreason_core::reporting::{aggregate_scores, parse_rater_sheet};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(sheet) = parse_rater_sheet(text) {
        let _ = aggregate_scores(&[sheet]);
    }
});
