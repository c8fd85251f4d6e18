#![no_main]
use brakelab::cli::{apply_overrides, RunConfig, Scale};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let base = RunConfig::for_scale(Scale::Desk, 0);
        let _ = apply_overrides(&base, text);
    }
});
