#![no_main]

use convexot::io::{read_rcdt, write_rcdt};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(value) = read_rcdt(text) {
        assert_eq!(read_rcdt(&write_rcdt(&value)).expect("written stack reads back"), value);
    }
});
