use std::ffi::{c_char, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use isar_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { isar_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn matrix_round_trip_through_handles_and_files() {
    let data: Vec<f64> = (0..24).map(|i| i as f64 * 0.5 - 3.0).collect();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(isar_matrix_new(3, 4, data.as_ptr(), &mut m), IsarStatus::Ok);
        let (mut r, mut c) = (0, 0);
        assert_eq!(isar_matrix_dims(m, &mut r, &mut c), IsarStatus::Ok);
        assert_eq!((r, c), (3, 4));

        let dir = tempfile::tempdir().unwrap();
        let path = c_path(&dir.path().join("m.cisr"));
        assert_eq!(isar_matrix_save(m, path.as_ptr()), IsarStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(isar_matrix_load(path.as_ptr(), &mut back), IsarStatus::Ok);
        let mut buf = vec![0.0; 24];
        assert_eq!(isar_matrix_copy(back, buf.as_mut_ptr(), buf.len()), IsarStatus::Ok);
        assert_eq!(buf, data);

        let mut short = vec![0.0; 23];
        assert_eq!(
            isar_matrix_copy(back, short.as_mut_ptr(), short.len()),
            IsarStatus::InvalidArgument
        );
        isar_matrix_free(back);
        isar_matrix_free(m);
    }
}

#[test]
fn errors_are_reported_per_thread() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(isar_matrix_new(2, 2, ptr::null(), &mut m), IsarStatus::NullPointer);
        assert!(last_error().contains("data"));

        let missing = CString::new("/nonexistent/x.cisr").unwrap();
        assert_eq!(isar_matrix_load(missing.as_ptr(), &mut m), IsarStatus::Io);

        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.cisr");
        std::fs::write(&junk, b"nope").unwrap();
        assert_eq!(isar_matrix_load(c_path(&junk).as_ptr(), &mut m), IsarStatus::DataError);
        assert!(last_error().contains("magic"));

        let mut mask = ptr::null_mut();
        assert_eq!(isar_mask_generate(9, 0.5, 4, 4, 0, &mut mask), IsarStatus::InvalidArgument);
        assert_eq!(isar_mask_generate(0, 1.0, 4, 4, 0, &mut mask), IsarStatus::InvalidArgument);
        assert!(mask.is_null());

        // Message length is reported even when the buffer is too small.
        let full = isar_last_error(ptr::null_mut(), 0);
        assert!(full > 0);

        isar_matrix_free(ptr::null_mut());
        isar_mask_free(ptr::null_mut());
    }
}

#[test]
fn simulate_mask_complete_score() {
    unsafe {
        let mut echo = ptr::null_mut();
        assert_eq!(isar_simulate_random(16, 16, 2, 3, &mut echo), IsarStatus::Ok);
        let mut mask = ptr::null_mut();
        assert_eq!(isar_mask_generate(ISAR_MASK_PIXEL, 0.4, 16, 16, 1, &mut mask), IsarStatus::Ok);
        let mut frac = 0.0;
        assert_eq!(isar_mask_missing_fraction(mask, &mut frac), IsarStatus::Ok);
        assert!((frac - 0.4).abs() < 0.01);

        let mut zf = ptr::null_mut();
        assert_eq!(
            isar_complete(ISAR_METHOD_ZERO_FILL, echo, mask, 0, ptr::null(), &mut zf),
            IsarStatus::Ok
        );
        let mut filled = ptr::null_mut();
        assert_eq!(
            isar_complete(ISAR_METHOD_IALM, echo, mask, 0, ptr::null(), &mut filled),
            IsarStatus::Ok
        );
        let (mut s_zf, mut s_ialm) = (IsarScores::default(), IsarScores::default());
        assert_eq!(isar_score(echo, zf, &mut s_zf), IsarStatus::Ok);
        assert_eq!(isar_score(echo, filled, &mut s_ialm), IsarStatus::Ok);
        assert!(s_ialm.rmse < 1e-3 && s_zf.rmse > 0.1, "{s_ialm:?} {s_zf:?}");

        let mut bad = ptr::null_mut();
        assert_eq!(
            isar_complete(42, echo, mask, 0, ptr::null(), &mut bad),
            IsarStatus::InvalidArgument
        );

        let mut noisy = ptr::null_mut();
        assert_eq!(isar_add_noise(echo, 10.0, 0, &mut noisy), IsarStatus::Ok);
        let mut image = ptr::null_mut();
        assert_eq!(isar_rd_image(noisy, &mut image), IsarStatus::Ok);

        for m in [echo, zf, filled, noisy, image] {
            isar_matrix_free(m);
        }
        isar_mask_free(mask);
    }
}

#[test]
fn ialm_on_missing_columns_reports_non_convergence() {
    unsafe {
        let mut echo = ptr::null_mut();
        assert_eq!(isar_simulate_random(16, 16, 2, 3, &mut echo), IsarStatus::Ok);
        let mut mask = ptr::null_mut();
        assert_eq!(isar_mask_generate(ISAR_MASK_COLUMN, 0.5, 16, 16, 1, &mut mask), IsarStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(
            isar_complete(ISAR_METHOD_IALM, echo, mask, 0, ptr::null(), &mut out),
            IsarStatus::NotConverged
        );
        assert!(!out.is_null());
        isar_matrix_free(out);
        isar_matrix_free(echo);
        isar_mask_free(mask);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/isar.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["isar_complete", "isar_matrix_free", "IsarStatus", "ISAR_METHOD_DIP"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"isar.h\"\nint main(void) { IsarMatrix *m = 0; isar_matrix_free(m); return ISAR_STATUS_OK; }\n",
    )
    .unwrap();
    let status = match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler; skipping syntax check");
            return;
        }
    };
    assert!(status.success());
}
