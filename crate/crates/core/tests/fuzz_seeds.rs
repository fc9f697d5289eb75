//! Replays the checked-in fuzz corpus through the parsers.

use std::fs;
use std::path::PathBuf;

use convexot::experiments::{ExperimentKind, ExperimentSpec};
use convexot::io::*;

fn corpus(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus for {target}");
    out
}

/// Seeds named `valid-*` must parse and survive a write-read cycle; the rest
/// must be rejected.
fn replay<T>(target: &str, read: impl Fn(&str) -> convexot::Result<T>, write: impl Fn(&T) -> String) {
    for (name, text) in corpus(target) {
        match read(&text) {
            Ok(v) => {
                assert!(name.starts_with("valid"), "{target}/{name} should be rejected");
                read(&write(&v)).unwrap_or_else(|e| panic!("{target}/{name} rewrite: {e}"));
            }
            Err(e) => assert!(!name.starts_with("valid"), "{target}/{name}: {e}"),
        }
    }
}

#[test]
fn text_formats() {
    replay("read_signal", read_signal, write_signal);
    replay("read_image", read_image, write_image);
    replay("read_tmap1d", read_tmap1d, write_tmap1d);
    replay("read_tmap2d", read_tmap2d, write_tmap2d);
    replay("read_sinogram", read_sinogram, write_sinogram);
    replay("read_rcdt", read_rcdt, write_rcdt);
    replay("read_coupling", read_coupling, |p| write_coupling(p).unwrap());
}

#[test]
fn json_formats() {
    replay("read_diffeo1d", read_diffeo1d, |h| to_json(h).unwrap());
    replay("read_diffeo2d", read_diffeo2d, |h| to_json(h).unwrap());
}

#[test]
fn experiment_configs() {
    for (name, text) in corpus("experiment_config") {
        let parsed: Vec<_> = ExperimentKind::ALL
            .into_iter()
            .filter_map(|k| ExperimentSpec::from_json(k, &text).ok())
            .filter(|s| s.validate().is_ok())
            .collect();
        assert_eq!(parsed.len() == 1, name.starts_with("valid"), "{name}");
    }
}

fn all_seeds() -> Vec<String> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let mut targets: Vec<_> = fs::read_dir(root).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    targets.sort();
    targets.iter().flat_map(|t| corpus(t)).map(|(_, text)| text).collect()
}

fn parse_everything(text: &str) {
    let _ = read_signal(text);
    let _ = read_image(text);
    let _ = read_tmap1d(text);
    let _ = read_tmap2d(text);
    let _ = read_sinogram(text);
    let _ = read_rcdt(text);
    let _ = read_coupling(text);
    let _ = read_diffeo1d(text);
    let _ = read_diffeo2d(text);
    for k in ExperimentKind::ALL {
        if let Ok(s) = ExperimentSpec::from_json(k, text) {
            let _ = s.validate();
        }
    }
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(512))]

    #[test]
    fn mutated_seeds_never_panic(pick in 0usize..64, at in 0.0..1.0f64, cut in 0.0..1.0f64, byte in 0u8..128) {
        let seeds = all_seeds();
        let mut text = seeds[pick % seeds.len()].clone().into_bytes();
        if !text.is_empty() {
            let i = ((text.len() - 1) as f64 * at) as usize;
            text[i] = byte;
            text.truncate(((text.len() as f64) * (0.5 + 0.5 * cut)) as usize + 1);
        }
        if let Ok(s) = String::from_utf8(text) {
            parse_everything(&s);
        }
    }
}
