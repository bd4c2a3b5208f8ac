#![no_main]

use libfuzzer_sys::fuzz_target;
use mprsim::scenario::parse_scenario;
use mprsim::sweep::parse_sweep;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    // base_file resolves to the same text so both paths are exercised
    if let Ok(spec) = parse_sweep(src, |_| Ok(src.to_owned())) {
        assert!(!spec.values.is_empty());
        assert!(!spec.seeds.is_empty());
        for &v in &spec.values {
            spec.parameter.apply(&spec.base, v).expect("validated values apply");
        }
    }
    let _ = parse_scenario(src);
});
