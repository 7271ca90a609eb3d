#![no_main]

use clinreason_core::session::{decode_log, encode_log};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = decode_log(text) {
        assert_eq!(decode_log(&encode_log(&records)).expect("encoded log decodes"), records);
    }
});
