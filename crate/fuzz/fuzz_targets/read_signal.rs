#![no_main]

use convexot::io::{read_signal, write_signal};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(value) = read_signal(text) {
        read_signal(&write_signal(&value)).expect("written signal reads back");
    }
});
