#![no_main]

use klab_core::config::{parse_run_config, to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_run_config(text) {
        // anything accepted must survive a round trip
        let again = parse_run_config(&to_json(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }
});
