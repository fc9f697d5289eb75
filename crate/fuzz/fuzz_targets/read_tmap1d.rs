#![no_main]

use convexot::io::{read_tmap1d, write_tmap1d};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(value) = read_tmap1d(text) {
        assert_eq!(read_tmap1d(&write_tmap1d(&value)).expect("written map reads back"), value);
    }
});
