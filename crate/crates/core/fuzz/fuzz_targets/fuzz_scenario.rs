#![no_main]

use libfuzzer_sys::fuzz_target;
use mprsim::scenario::{echo_scenario, parse_scenario};

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_scenario(src) {
        // anything accepted must survive its own echo unchanged
        let echoed = echo_scenario(&cfg);
        let again = parse_scenario(&echoed).expect("echo of a valid scenario parses");
        assert_eq!(cfg, again);
    }
});
