#![no_main]

use findability::querygen::QuerySet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = QuerySet::read_jsonl(data) {
        let mut out = Vec::new();
        set.write_jsonl(&mut out).unwrap();
        assert_eq!(QuerySet::read_jsonl(&out[..]).unwrap(), set);
    }
});
