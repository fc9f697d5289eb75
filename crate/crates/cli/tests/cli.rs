use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use convexot::io::{read_tmap1d, write_signal};
use convexot::{Grid1D, Signal1D};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_convexot"));
    c.env_remove("CONVEXOT_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, p: &Signal1D) -> String {
    let path = dir.join(name);
    fs::write(&path, write_signal(p)).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn uniform_input_gives_identity_map() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid1D::new(0.0, 1.0, 257).unwrap();
    let input = write(dir.path(), "p.csv", &Signal1D::uniform(grid));
    let out = dir.path().join("map.csv");
    let o = run(&["cdt", "--input", &input, "--reference", "uniform", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let map = read_tmap1d(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(map.sup_distance_to(|x| x) < 1e-9);
    assert!(dir.path().join("map.csv.manifest.json").exists());
}

#[test]
fn translated_box_gives_shifted_identity() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid1D::new(-1.0, 2.0, 1201).unwrap();
    let input = write(dir.path(), "p.csv", &Signal1D::boxes(grid, &[(0.25, 1.25, 1.0)]).unwrap());
    let reference = write(dir.path(), "r.csv", &Signal1D::boxes(grid, &[(0.0, 1.0, 1.0)]).unwrap());
    let out = dir.path().join("map.csv");
    let o = run(&["cdt", "--input", &input, "--reference", &reference, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let map = read_tmap1d(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(map.sup_distance_to(|x| x + 0.25) <= 2.0 * grid.dx(), "{}", map.sup_distance_to(|x| x + 0.25));
}

#[test]
fn malformed_header_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.csv");
    fs::write(&input, "# grid3d 0 1 4\n1\n1\n1\n1\n").unwrap();
    let out = dir.path().join("map.csv");
    let o = run(&["cdt", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn reference_with_interior_gap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid1D::new(0.0, 1.0, 201).unwrap();
    let input = write(dir.path(), "p.csv", &Signal1D::uniform(grid));
    let gapped = Signal1D::boxes(grid, &[(0.1, 0.3, 1.0), (0.6, 0.9, 1.0)]).unwrap();
    let reference = write(dir.path(), "r.csv", &gapped);
    let out = dir.path().join("map.csv");
    let o = run(&["cdt", "--input", &input, "--reference", &reference, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

fn csv_rows(stdout: &[u8]) -> Vec<Vec<String>> {
    String::from_utf8_lossy(stdout).lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn composition_suite_passes() {
    let o = run(&["verify", "composition-1d", "--seed", "42"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dx = 1.0 / 2047.0;
    let worst = csv_rows(&o.stdout).iter().map(|r| r[1].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(worst <= 3.0 * dx, "{worst}");
}

#[test]
fn violation_suite_reports_ratio() {
    let o = run(&["verify", "ha-violation"]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&o.stdout);
    let ratio = rows.iter().find(|r| r[0] == "gap-over-control").unwrap();
    assert!(ratio[1].parse::<f64>().unwrap() > 5.0);
}

#[test]
fn unknown_suite_exits_2() {
    assert_eq!(code(&run(&["verify", "no-such-suite"])), 2);
}

#[test]
fn missing_outdir_exits_2() {
    assert_eq!(code(&run(&["experiment", "vector-field"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let gone = dir.path().join("absent");
    assert_eq!(code(&run(&["experiment", "vector-field", "--out", gone.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["experiment", "no-such-experiment", "--out", dir.path().to_str().unwrap()])), 2);
}

#[test]
fn vector_field_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["experiment", "vector-field"]).env("CONVEXOT_OUT_DIR", dir.path()).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("vector_field.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        csv.lines().skip(1).map(|l| l.split(',').map(|t| t.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 441);
    let at = rows.iter().find(|r| (r[0] - 1.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12).unwrap();
    assert!((at[2] - 1.2).abs() < 1e-10 && (at[3] - 1.2).abs() < 1e-10);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn one_two_bump_is_deterministic_and_separable() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let o = run(&["experiment", "one-two-bump", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
            dir
        })
        .collect();
    for name in ["projections.csv", "summary.csv", "samples.csv", "config.json"] {
        let a = fs::read(runs[0].path().join(name)).unwrap();
        let b = fs::read(runs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    let summary = fs::read_to_string(runs[0].path().join("summary.csv")).unwrap();
    let transform = summary.lines().find(|l| l.starts_with("transform,")).unwrap();
    assert_eq!(transform.split(',').nth(1).unwrap().parse::<f64>().unwrap(), 1.0);
    let projections = fs::read_to_string(runs[0].path().join("projections.csv")).unwrap();
    assert_eq!(projections.lines().count(), 1001);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    fs::write(&config, r#"{"experiment":"vector-field","lo":-1.0,"hi":1.0,"n":5}"#).unwrap();
    let o = run(&[
        "experiment",
        "vector-field",
        "--config",
        config.to_str().unwrap(),
        "--grid-n",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("vector_field.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);

    fs::write(&config, r#"{"experiment":"vector-field","lo":1.0,"hi":-1.0,"n":5}"#).unwrap();
    let o = run(&["experiment", "vector-field", "--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    fs::write(&config, "{not json").unwrap();
    let o = run(&["experiment", "vector-field", "--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn manifest_digest_is_stable() {
    let digest = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&["experiment", "lda-degree5", "--seed", seed, "--grid-n", "128", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        m["config_digest"].as_str().unwrap().to_owned()
    };
    assert_eq!(digest("3"), digest("3"));
    assert_ne!(digest("3"), digest("4"));
}
