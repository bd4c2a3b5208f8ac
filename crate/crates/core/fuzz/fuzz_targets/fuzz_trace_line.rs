#![no_main]

use libfuzzer_sys::fuzz_target;
use mprsim::TraceRecord;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(rec) = TraceRecord::from_json_line(line) {
        let text = rec.to_json_line();
        assert_eq!(TraceRecord::from_json_line(&text).unwrap(), rec);
    }
});
