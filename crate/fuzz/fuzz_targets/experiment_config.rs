#![no_main]

use convexot::experiments::{ExperimentKind, ExperimentSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for kind in ExperimentKind::ALL {
        if let Ok(spec) = ExperimentSpec::from_json(kind, text) {
            let _ = spec.validate();
            let json = spec.to_json().expect("config writes");
            ExperimentSpec::from_json(kind, &json).expect("written config reads back");
        }
    }
});
