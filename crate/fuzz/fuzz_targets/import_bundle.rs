#![no_main]

use clinreason_core::reporting::import_bundle;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = import_bundle(data);
});
