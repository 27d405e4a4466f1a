#![no_main]

use klab_core::sampler::trace::{decode_trace, encode_trace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = decode_trace(data) {
        // canonical form is a fixed point
        let bytes = encode_trace(&t).unwrap();
        assert_eq!(encode_trace(&decode_trace(&bytes).unwrap()).unwrap(), bytes);
    }
});
