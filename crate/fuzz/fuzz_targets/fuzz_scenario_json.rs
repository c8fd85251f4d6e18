#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Parsing arbitrary scenario files must never panic; valid specs
        // must also survive re-serialization.
        if let Ok(spec) = brakelab::scenario::ScenarioSpec::from_json(text) {
            let round = spec.to_json();
            let again = brakelab::scenario::ScenarioSpec::from_json(&round)
                .expect("serialized scenario must re-parse");
            assert_eq!(again.name, spec.name);
        }
    }
});
