#![no_main]

use klab_core::sampler::parse_observable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(o) = parse_observable(text) {
        assert_eq!(parse_observable(&o.to_string()).unwrap(), o);
    }
});
