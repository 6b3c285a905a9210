#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // load must never panic on arbitrary bytes; preprocessing of a
    // successfully parsed table must never panic either
    if let Ok(raw) = clustrec_core::ingest::read_csv("fuzz", data, None) {
        let _ = clustrec_core::ingest::preprocess(&raw);
    }
});
