#![no_main]

use clinreason_core::case::{parse_case, serialize_case, validate_case};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(case) = parse_case(text) {
        let _ = validate_case(&case);
        let again = parse_case(&serialize_case(&case)).expect("serialized case parses");
        assert_eq!(again, case);
    }
});
