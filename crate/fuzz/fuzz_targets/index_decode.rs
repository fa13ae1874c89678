#![no_main]

use findability::index::Index;
use libfuzzer_sys::fuzz_target;

// Anything that decodes must re-encode to something that decodes identically.
fuzz_target!(|data: &[u8]| {
    if let Ok(index) = Index::from_bytes(data) {
        let bytes = index.to_bytes();
        let again = Index::from_bytes(&bytes).expect("re-encoded index decodes");
        assert_eq!(again.to_bytes(), bytes);
    }
});
