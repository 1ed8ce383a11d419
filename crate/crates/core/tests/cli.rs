mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn isar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isar"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn pipeline_and_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let d = d.path();
    fs::write(d.join("s.ini"), common::SMALL_SCENE).unwrap();

    assert_eq!(code(&isar(d, &["simulate", "--scene", "s.ini", "--out", "e.cisr"])), 0);
    assert_eq!(code(&isar(d, &["noise", "--input", "e.cisr", "--snr-db", "-10", "--out", "n.cisr"])), 0);
    assert_eq!(
        code(&isar(d, &["mask", "--kind", "pixel", "--ratio", "0.4", "--like", "e.cisr", "--out", "m.imsk"])),
        0
    );
    assert_eq!(
        code(&isar(d, &["complete", "--method", "ialm", "--input", "e.cisr", "--mask", "m.imsk", "--out", "c.cisr"])),
        0
    );
    let metrics = isar(d, &["metrics", "--reference", "e.cisr", "--estimate", "c.cisr"]);
    assert_eq!(code(&metrics), 0);
    let text = String::from_utf8(metrics.stdout).unwrap();
    let rmse: f64 = text.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(rmse < 1e-3, "{text}");
    assert_eq!(code(&isar(d, &["image", "--input", "c.cisr", "--out", "c.pgm", "--top-db", "30", "--center"])), 0);
    assert!(fs::read(d.join("c.pgm")).unwrap().starts_with(b"P5\n16 16\n255\n"));

    // Usage errors.
    assert_eq!(code(&isar(d, &["frobnicate"])), 1);
    assert_eq!(code(&isar(d, &["complete", "--method", "svt"])), 1);
    assert_eq!(code(&isar(d, &["mask", "--kind", "pixel", "--ratio", "1.0", "--rows", "4", "--cols", "4", "--out", "x"])), 1);
    assert_eq!(code(&isar(d, &["--help"])), 0);
    // Data errors.
    assert_eq!(code(&isar(d, &["image", "--input", "missing.cisr", "--out", "x.pgm"])), 2);
    fs::write(d.join("bad.cisr"), b"junk").unwrap();
    assert_eq!(code(&isar(d, &["image", "--input", "bad.cisr", "--out", "x.pgm"])), 2);
    // Non-convergence: IALM cannot fill whole missing columns.
    assert_eq!(
        code(&isar(d, &["mask", "--kind", "column", "--ratio", "0.5", "--like", "e.cisr", "--out", "col.imsk"])),
        0
    );
    assert_eq!(
        code(&isar(d, &["complete", "--method", "ialm", "--input", "e.cisr", "--mask", "col.imsk", "--out", "x.cisr"])),
        3
    );
}

#[test]
fn image_matches_golden() {
    let d = tempfile::tempdir().unwrap();
    let d = d.path();
    let scene = common::golden("two_points.ini");
    let s = scene.to_str().unwrap();
    assert_eq!(code(&isar(d, &["simulate", "--scene", s, "--out", "e.cisr"])), 0);
    assert_eq!(code(&isar(d, &["image", "--input", "e.cisr", "--out", "a.pgm"])), 0);
    assert_eq!(code(&isar(d, &["image", "--input", "e.cisr", "--out", "b.pgm", "--center"])), 0);
    assert_eq!(fs::read(d.join("a.pgm")).unwrap(), fs::read(common::golden("two_points.pgm")).unwrap());
    assert_eq!(
        fs::read(d.join("b.pgm")).unwrap(),
        fs::read(common::golden("two_points_centered.pgm")).unwrap()
    );
}

#[test]
fn experiment_single_thread_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let d = d.path();
    fs::write(d.join("s.ini"), common::SMALL_SCENE).unwrap();
    fs::write(d.join("exp.ini"), common::small_grid_ini(&d.join("s.ini"), &d.join("out"))).unwrap();
    assert_eq!(code(&isar(d, &["experiment", "--config", "exp.ini", "--single-thread"])), 0);
    let first = fs::read(d.join("out/results.csv")).unwrap();
    assert_eq!(code(&isar(d, &["experiment", "--config", "exp.ini", "--single-thread"])), 0);
    assert_eq!(first, fs::read(d.join("out/results.csv")).unwrap());
    assert_eq!(code(&isar(d, &["experiment", "--config", "nope.ini"])), 2);
}
