#![no_main]

use convexot::io::{read_coupling, write_coupling};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(value) = read_coupling(text) {
        read_coupling(&write_coupling(&value).expect("plan writes")).expect("written plan reads back");
    }
});
