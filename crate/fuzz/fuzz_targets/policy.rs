#![no_main]

use libfuzzer_sys::fuzz_target;
use netsearch_core::io::parse_policy;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_policy(text);
    }
});
