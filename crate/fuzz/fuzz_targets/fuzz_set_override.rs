#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(expr) = std::str::from_utf8(data) {
        let mut spec = fdnoma::config::RunSpec::default();
        if fdnoma::config::apply_set_override(&mut spec, expr).is_ok() {
            let _ = spec.validate();
        }
    }
});
