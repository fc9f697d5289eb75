#![no_main]

use convexot::io::{read_diffeo2d, to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(value) = read_diffeo2d(text) {
        read_diffeo2d(&to_json(&value).expect("diffeo writes")).expect("written diffeo reads back");
    }
});
