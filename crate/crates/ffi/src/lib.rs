//! C ABI over `isar-core`.
//!
//! Every function returns an [`IsarStatus`] code; on failure the message is
//! kept per thread and can be read with [`isar_last_error`]. Matrices and
//! masks are opaque heap handles that the caller frees with the matching
//! `_free` function. Complex data crosses the boundary as interleaved
//! `(re, im)` doubles in row-major order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::os::raw::c_int;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use isar_core::dip::DipConfig;
use isar_core::harness::config::load_method_config;
use isar_core::harness::{complete, load_mask, load_matrix, save_mask, save_matrix, Method};
use isar_core::lowrank::SolverConfig;
use isar_core::metrics::{add_noise, MetricsReport};
use isar_core::radar::{rd_image, simulate_echo, RadarParams, Scene};
use isar_core::sampling::{gen_mask, Mask, MaskKind};
use isar_core::{ComplexMatrix, Error};
use num_complex::Complex64;

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IsarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Malformed or inconsistent data (bad file, dimension mismatch, ...).
    DataError = 3,
    Io = 4,
    /// The solver stopped without meeting its tolerance; outputs are still set.
    NotConverged = 5,
    Panic = 6,
}

/// Opaque complex matrix.
pub struct IsarMatrix(ComplexMatrix);

/// Opaque sampling mask.
pub struct IsarMask(Mask);

/// Image-domain scores of an estimate against a reference.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IsarScores {
    pub rmse: f64,
    pub correlation: f64,
    pub contrast: f64,
    pub snr_db: f64,
}

pub const ISAR_METHOD_ZERO_FILL: c_int = 0;
pub const ISAR_METHOD_NNM: c_int = 1;
pub const ISAR_METHOD_IALM: c_int = 2;
pub const ISAR_METHOD_DIP: c_int = 3;

pub const ISAR_MASK_PIXEL: c_int = 0;
pub const ISAR_MASK_COLUMN: c_int = 1;
pub const ISAR_MASK_COMPRESSED: c_int = 2;

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(msg.bytes().filter(|&b| b != 0));
    });
}

struct Failure(IsarStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io(_) => IsarStatus::Io,
            Error::InvalidArgument(_) | Error::Config(_) => IsarStatus::InvalidArgument,
            _ => IsarStatus::DataError,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(IsarStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<IsarStatus, Failure>) -> IsarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IsarStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(IsarStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn isar_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Builds a matrix from `2·rows·cols` interleaved doubles.
///
/// # Safety
/// `data` must point to `2·rows·cols` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isar_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut IsarMatrix,
) -> IsarStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(IsarStatus::InvalidArgument, "dimension overflow".into()))?;
        let raw = std::slice::from_raw_parts(data, 2 * n);
        let values = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        write_out(out, IsarMatrix(ComplexMatrix::from_vec(rows, cols, values)?));
        Ok(IsarStatus::Ok)
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn isar_matrix_free(m: *mut IsarMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isar_matrix_dims(m: *const IsarMatrix, rows: *mut usize, cols: *mut usize) -> IsarStatus {
    guard(|| {
        let m = borrow(m, "matrix")?;
        if rows.is_null() || cols.is_null() {
            return Err(null("rows/cols"));
        }
        (*rows, *cols) = m.0.dims();
        Ok(IsarStatus::Ok)
    })
}

/// Copies the entries as interleaved doubles into `buf`, which must hold
/// `len >= 2·rows·cols` values.
///
/// # Safety
/// `m` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn isar_matrix_copy(m: *const IsarMatrix, buf: *mut f64, len: usize) -> IsarStatus {
    guard(|| {
        let m = borrow(m, "matrix")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let need = 2 * m.0.len();
        if len < need {
            return Err(Failure(
                IsarStatus::InvalidArgument,
                format!("buffer holds {len} doubles, need {need}"),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, need);
        for (o, z) in out.chunks_exact_mut(2).zip(m.0.as_slice()) {
            o[0] = z.re;
            o[1] = z.im;
        }
        Ok(IsarStatus::Ok)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isar_matrix_load(path: *const c_char, out: *mut *mut IsarMatrix) -> IsarStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, IsarMatrix(load_matrix(path)?));
        Ok(IsarStatus::Ok)
    })
}

/// # Safety
/// `m` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn isar_matrix_save(m: *const IsarMatrix, path: *const c_char) -> IsarStatus {
    guard(|| {
        let m = borrow(m, "matrix")?;
        save_matrix(&m.0, path_arg(path, "path")?)?;
        Ok(IsarStatus::Ok)
    })
}

/// Echo of `count` random unit scatterers on an `n_angle × n_freq` grid with
/// default radar parameters.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isar_simulate_random(
    n_angle: usize,
    n_freq: usize,
    count: usize,
    seed: u64,
    out: *mut *mut IsarMatrix,
) -> IsarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let scene = Scene::random(RadarParams::with_grid(n_angle, n_freq), count, seed)?;
        write_out(out, IsarMatrix(simulate_echo(&scene)?));
        Ok(IsarStatus::Ok)
    })
}

/// Unnormalized range-Doppler image of an echo.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isar_rd_image(m: *const IsarMatrix, out: *mut *mut IsarMatrix) -> IsarStatus {
    guard(|| {
        let m = borrow(m, "matrix")?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, IsarMatrix(rd_image(&m.0)?));
        Ok(IsarStatus::Ok)
    })
}

/// Adds white complex Gaussian noise at exactly `snr_db` (empirical).
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isar_add_noise(
    m: *const IsarMatrix,
    snr_db: f64,
    seed: u64,
    out: *mut *mut IsarMatrix,
) -> IsarStatus {
    guard(|| {
        let m = borrow(m, "matrix")?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, IsarMatrix(add_noise(&m.0, snr_db, seed)?));
        Ok(IsarStatus::Ok)
    })
}

/// `kind` is one of the `ISAR_MASK_*` constants; `ratio` is the missing
/// fraction in `[0, 1)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isar_mask_generate(
    kind: c_int,
    ratio: f64,
    rows: usize,
    cols: usize,
    seed: u64,
    out: *mut *mut IsarMask,
) -> IsarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = u8::try_from(kind)
            .map_err(|_| Error::InvalidArgument(format!("unknown mask kind {kind}")))
            .and_then(MaskKind::from_code)?;
        write_out(out, IsarMask(gen_mask(kind, ratio, rows, cols, seed)?));
        Ok(IsarStatus::Ok)
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn isar_mask_free(m: *mut IsarMask) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isar_mask_missing_fraction(m: *const IsarMask, out: *mut f64) -> IsarStatus {
    guard(|| {
        let m = borrow(m, "mask")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.0.missing_fraction();
        Ok(IsarStatus::Ok)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isar_mask_load(path: *const c_char, out: *mut *mut IsarMask) -> IsarStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_out(out, IsarMask(load_mask(path)?));
        Ok(IsarStatus::Ok)
    })
}

/// # Safety
/// `m` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn isar_mask_save(m: *const IsarMask, path: *const c_char) -> IsarStatus {
    guard(|| {
        let m = borrow(m, "mask")?;
        save_mask(&m.0, path_arg(path, "path")?)?;
        Ok(IsarStatus::Ok)
    })
}

/// Completes the unobserved entries of `m`. `method` is one of the
/// `ISAR_METHOD_*` constants. `config_path` may be null for default solver
/// and network settings, or name an INI file with `[solver]`/`[dip]`
/// sections. Returns `NotConverged` (with `*out` set) when an iterative
/// solver stops at its iteration cap.
///
/// # Safety
/// `m` and `mask` must be live handles; `config_path` null or a
/// NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isar_complete(
    method: c_int,
    m: *const IsarMatrix,
    mask: *const IsarMask,
    seed: u64,
    config_path: *const c_char,
    out: *mut *mut IsarMatrix,
) -> IsarStatus {
    guard(|| {
        let m = borrow(m, "matrix")?;
        let mask = borrow(mask, "mask")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let method = match method {
            ISAR_METHOD_ZERO_FILL => Method::ZeroFill,
            ISAR_METHOD_NNM => Method::Nnm,
            ISAR_METHOD_IALM => Method::Ialm,
            ISAR_METHOD_DIP => Method::Dip,
            other => return Err(Failure(IsarStatus::InvalidArgument, format!("unknown method {other}"))),
        };
        let (solver, dip) = if config_path.is_null() {
            (SolverConfig::default(), DipConfig::default())
        } else {
            load_method_config(path_arg(config_path, "config_path")?)?
        };
        let done = complete(method, &m.0, &mask.0, seed, &solver, &dip)?;
        let converged = done.converged || method == Method::Dip;
        write_out(out, IsarMatrix(done.matrix));
        Ok(if converged {
            IsarStatus::Ok
        } else {
            set_error(&format!("{method} did not converge"));
            IsarStatus::NotConverged
        })
    })
}

/// Scores the image of `estimate` against the image of `reference` (both
/// given as echoes).
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isar_score(
    reference: *const IsarMatrix,
    estimate: *const IsarMatrix,
    out: *mut IsarScores,
) -> IsarStatus {
    guard(|| {
        let r = borrow(reference, "reference")?;
        let e = borrow(estimate, "estimate")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = MetricsReport::score(&rd_image(&r.0)?, &rd_image(&e.0)?)?;
        *out = IsarScores {
            rmse: s.rmse,
            correlation: s.correlation,
            contrast: s.contrast,
            snr_db: s.snr_db,
        };
        Ok(IsarStatus::Ok)
    })
}
