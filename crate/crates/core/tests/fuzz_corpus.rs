//! Replays the checked-in fuzz corpus through the same properties the
//! fuzz targets assert.

use std::fs;
use std::path::PathBuf;

use klab_core::config::{parse_run_config, to_json};
use klab_core::hypersphere::parse_exponent_spec;
use klab_core::sampler::parse_observable;
use klab_core::sampler::trace::{decode_trace, encode_trace};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn run_config_seeds_parse_and_round_trip() {
    for (p, bytes) in seeds("parse_run_config") {
        let cfg = parse_run_config(std::str::from_utf8(&bytes).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(parse_run_config(&to_json(&cfg).unwrap()).unwrap(), cfg);
    }
}

#[test]
fn trace_seeds_decode_canonically() {
    for (p, bytes) in seeds("decode_trace") {
        let t = decode_trace(&bytes).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(encode_trace(&t).unwrap(), bytes);
    }
}

#[test]
fn exponent_and_observable_seeds_parse() {
    for (p, bytes) in seeds("parse_exponent_spec") {
        assert!(parse_exponent_spec(std::str::from_utf8(&bytes).unwrap()).is_ok(), "{}", p.display());
    }
    for (p, bytes) in seeds("parse_observable") {
        let o = parse_observable(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(parse_observable(&o.to_string()).unwrap(), o, "{}", p.display());
    }
}
