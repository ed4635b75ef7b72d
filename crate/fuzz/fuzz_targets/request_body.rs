#![no_main]

use libfuzzer_sys::fuzz_target;
use netsearch::api::ClassificationRequest;
use netsearch_core::io::SessionSpec;

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<ClassificationRequest>(data);
    if let Ok(spec) = serde_json::from_slice::<SessionSpec>(data) {
        if spec.network.nodes.len() <= 12 {
            let _ = netsearch::store::build_session(&spec);
        }
    }
});
