use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use baker_core::io;
use baker_core::numerics::C64;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sloppy-baker"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(out: &Path, args: &[&str]) {
    let o = run(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn without_timing(manifest: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(manifest).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("wall_time_s");
    obj.get_mut("config").unwrap()["common"].as_object_mut().unwrap().remove("out");
    v
}

#[test]
fn shift_spectrum_zero_multiplicity() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &["spectrum", "--N", "4", "--delta", "0.5", "--channel", "shift"]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(report["zero_multiplicity"], 12);
    assert_eq!(report["zero_defect"]["defective"], true);
    let values = io::read_spectrum_csv(fs::File::open(dir.path().join("spectrum.csv")).unwrap()).unwrap();
    assert_eq!(values.len(), 16);
    assert_eq!(values.iter().filter(|z| z.norm() < 1e-8).count(), 12);
}

#[test]
fn identical_config_gives_identical_files() {
    let cases: [&[&str]; 4] = [
        &["entropy", "--N", "16", "--tmax", "6", "--samples", "4", "--seed", "9"],
        &["quantum-evolve", "--N", "16", "--steps", "0,2"],
        &["classical-evolve", "--M", "32", "--steps", "0,3"],
        &["return-prob", "--N", "8", "--T", "2", "--stride", "2"],
    ];
    for args in cases {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_ok(a.path(), args);
        run_ok(b.path(), args);
        let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for name in names {
            let x = fs::read_to_string(a.path().join(&name)).unwrap();
            let y = fs::read_to_string(b.path().join(&name)).unwrap();
            if name == "manifest.json" {
                assert_eq!(without_timing(&x), without_timing(&y));
            } else {
                assert_eq!(x, y, "{name:?} differs for {args:?}");
            }
        }
    }
}

#[test]
fn outputs_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["entropy", "--N", "8", "--tmax", "4", "--samples", "2"]);
    let (meta, points) = io::read_entropy_csv(std::io::BufReader::new(fs::File::open(d.join("entropy.csv")).unwrap())).unwrap();
    assert_eq!(points.len(), 5);
    assert!(meta.iter().any(|(k, v)| k == "samples" && v == "2"));

    run_ok(d, &["classical-evolve", "--M", "16", "--steps", "1", "--format", "json"]);
    let (f, delta) = io::read_density_json(fs::File::open(d.join("density_T1.json")).unwrap()).unwrap();
    assert_eq!((f.resolution(), delta), (16, 0.25));
    assert!((f.total_mass() - 1.0).abs() < 1e-12);

    run_ok(d, &["quantum-evolve", "--N", "16", "--steps", "1"]);
    let grid = io::read_grid_csv(fs::File::open(d.join("husimi_T1.csv")).unwrap()).unwrap();
    assert!((grid.sum() - 16.0).abs() < 1e-8);
    let meta = io::read_grid_metadata(fs::File::open(d.join("husimi_T1.json")).unwrap()).unwrap();
    assert_eq!((meta.n, meta.t, meta.kind.as_str()), (16, 1, "husimi"));

    run_ok(d, &["orbits", "--T", "4", "--format", "json"]);
    let orbits = io::read_orbits_json(fs::File::open(d.join("orbits_T4.json")).unwrap()).unwrap();
    assert_eq!(orbits.len(), 5);

    run_ok(d, &["invariant", "--N", "8"]);
    let rho = io::read_matrix_json(fs::File::open(d.join("invariant_state.json")).unwrap()).unwrap();
    assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
    run_ok(d, &["husimi", "--N", "8", "--state", d.join("invariant_state.json").to_str().unwrap()]);
    let grid = io::read_grid_csv(fs::File::open(d.join("husimi.csv")).unwrap()).unwrap();
    assert!((grid.sum() - 8.0).abs() < 1e-8);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(dir.path(), args).status.code();
    // Non-integer shift and odd dimension are configuration errors.
    assert_eq!(code(&["spectrum", "--N", "6", "--delta", "0.25"]), Some(2));
    assert_eq!(code(&["husimi", "--N", "7"]), Some(2));
    assert_eq!(code(&["spectrum", "--bogus"]), Some(2));
    assert_eq!(code(&["return-prob", "--N", "8", "--T", "1", "--window", "4:2,0:8"]), Some(2));
    // An iteration budget too small to converge is a numerical failure.
    assert_eq!(code(&["invariant", "--N", "8", "--max-iter", "2"]), Some(3));

    let o = run(dir.path(), &["spectrum", "--N", "6", "--delta", "0.25"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not an integer"));
}

#[test]
fn thread_override_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sloppy-baker"))
        .env("BAKER_THREADS", "0")
        .args(["--out", dir.path().to_str().unwrap(), "orbits", "--T", "2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_sloppy-baker"))
        .env("BAKER_THREADS", "2")
        .args(["--out", dir.path().to_str().unwrap(), "orbits", "--T", "2"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["threads"], 2);
}
