#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let mut config = clustrec_core::config::RunConfig::default();
        if config.apply_text(text).is_ok() {
            let _ = config.validate();
        }
    }
});
