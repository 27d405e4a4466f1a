#![no_main]

use klab_core::hypersphere::{parse_exponent_spec, sphere_moment};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(exps) = parse_exponent_spec(text) {
        if let Ok(m) = sphere_moment(exps.len().max(1) + 3, &exps) {
            assert!((0.0..=1.0).contains(&m));
        }
    }
});
