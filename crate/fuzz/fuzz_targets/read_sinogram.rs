#![no_main]

use convexot::io::{read_sinogram, write_sinogram};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(value) = read_sinogram(text) {
        read_sinogram(&write_sinogram(&value)).expect("written sinogram reads back");
    }
});
