#![no_main]

use convexot::io::{read_tmap2d, write_tmap2d};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(value) = read_tmap2d(text) {
        read_tmap2d(&write_tmap2d(&value)).expect("written map reads back");
    }
});
