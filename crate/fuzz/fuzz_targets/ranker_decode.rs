#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = clustrec_core::ranker::RankerModel::decode(text) {
            // a decoded model must be safe to score with
            let features = vec![0.5f64; model.feature_count];
            let _ = model.score(&features);
            let _ = model.features_used();
        }
    }
});
