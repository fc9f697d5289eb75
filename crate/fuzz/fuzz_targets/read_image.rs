#![no_main]

use convexot::io::{read_image, write_image};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(value) = read_image(text) {
        read_image(&write_image(&value)).expect("written image reads back");
    }
});
