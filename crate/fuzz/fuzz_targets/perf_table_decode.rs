#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = clustrec_core::perf::PerformanceTable::decode(text) {
            let reencoded = table.encode();
            let _ = clustrec_core::perf::PerformanceTable::decode(&reencoded)
                .expect("re-encode of a valid table must decode");
        }
    }
});
