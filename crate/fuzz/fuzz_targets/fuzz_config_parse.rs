#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // The parser must never panic on any input; accepted specs must also
        // survive full validation.
        if let Ok(spec) = fdnoma::config::parse_config_str(text) {
            let _ = spec.validate();
        }
    }
});
