#![no_main]

use findability::scores::{read_csv, to_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(scores) = read_csv(data) {
        assert_eq!(read_csv(&to_csv(&scores)[..]).unwrap(), scores);
    }
});
