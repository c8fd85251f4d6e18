#![no_main]
use libfuzzer_sys::fuzz_target;
use std::io::Cursor;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    // Checkpoint manifests are untrusted: shape products and byte counts
    // must be validated before any allocation.
    let _ = brakelab::nn::read_params(Cursor::new(data), Path::new("fuzz-input"));
});
