#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(block) = clustrec_core::matio::MatrixBlock::decode(data) {
        let reencoded = block.encode();
        let again = clustrec_core::matio::MatrixBlock::decode(&reencoded)
            .expect("re-encode of a valid block must decode");
        assert_eq!(block.rows, again.rows);
        assert_eq!(block.cols, again.cols);
    }
    // streaming decode must also be total
    let _ = clustrec_core::matio::MatrixBlock::decode_prefix(data);
});
