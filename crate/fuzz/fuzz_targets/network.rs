#![no_main]

use libfuzzer_sys::fuzz_target;
use netsearch_core::io::{parse_network, NetworkJson};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(net) = parse_network(text) else { return };
    // Accepted networks survive a round trip unchanged.
    let json = serde_json::to_string(&NetworkJson::from(&net)).unwrap();
    let again = parse_network(&json).expect("serialised network parses");
    assert_eq!(again.edges(), net.edges());
    assert_eq!(again.labels(), net.labels());
});
