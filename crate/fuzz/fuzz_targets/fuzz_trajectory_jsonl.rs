#![no_main]
use libfuzzer_sys::fuzz_target;
use std::io::Cursor;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    // Arbitrary JSONL input must produce either a trajectory or a
    // descriptive error, never a panic or runaway allocation.
    let _ = brakelab::data::read_trajectory(Cursor::new(data), Path::new("fuzz-input"));
});
