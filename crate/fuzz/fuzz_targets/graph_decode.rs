#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(graph) = clustrec_core::graph::SimilarityGraph::decode(text) {
            // decoded graphs must re-encode and survive adjacency access
            let reencoded = graph.encode();
            let again = clustrec_core::graph::SimilarityGraph::decode(&reencoded)
                .expect("re-encode of a valid graph must decode");
            assert_eq!(graph, again);
        }
    }
});
