//! Replays the checked-in fuzz seeds through the same checks the fuzz
//! targets make, so the corpus stays valid on stable toolchains.

use std::fs;
use std::path::PathBuf;

use mprsim::scenario::{echo_scenario, parse_scenario};
use mprsim::sweep::parse_sweep;
use mprsim::TraceRecord;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn scenario_seeds_echo_round_trip() {
    let mut accepted = 0;
    for (path, src) in seeds("fuzz_scenario") {
        if let Ok(cfg) = parse_scenario(&src) {
            let again = parse_scenario(&echo_scenario(&cfg)).unwrap();
            assert_eq!(cfg, again, "{}", path.display());
            accepted += 1;
        }
    }
    assert!(accepted >= 3);
}

#[test]
fn sweep_seeds_parse() {
    let base = seeds("fuzz_scenario")
        .into_iter()
        .find(|(p, _)| p.ends_with("seed_minimal.toml"))
        .unwrap()
        .1;
    for (path, src) in seeds("fuzz_sweep") {
        let spec = parse_sweep(&src, |_| Ok(base.clone())).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        for &v in &spec.values {
            spec.parameter.apply(&spec.base, v).unwrap();
        }
    }
}

#[test]
fn trace_seeds_round_trip() {
    for (path, src) in seeds("fuzz_trace_line") {
        let rec = TraceRecord::from_json_line(src.trim_end()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(TraceRecord::from_json_line(&rec.to_json_line()).unwrap(), rec);
    }
}

#[test]
fn trace_parser_rejects_malformed_lines() {
    for line in ["", "{}", "[1,2]", "{\"slot\":-1}", "{\"slot\":1,\"bogus\":2}", "\u{0}"] {
        assert!(TraceRecord::from_json_line(line).is_err(), "{line:?}");
    }
}
