#![no_main]

use libfuzzer_sys::fuzz_target;
use netsearch_core::io::parse_session_log;
use netsearch_core::session::SearchSession;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok((spec, records)) = parse_session_log(text) else { return };
    // Replaying is the other half of loading a log; keep it cheap.
    if spec.network.nodes.len() > 12 || records.len() > 64 {
        return;
    }
    if let Ok(net) = spec.network.build() {
        let _ = SearchSession::replay(net, spec.prior, spec.model, spec.policy, &records);
    }
});
