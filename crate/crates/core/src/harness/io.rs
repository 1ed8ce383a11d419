//! Binary matrix and mask files.
//!
//! Matrix (`CISR`): magic, `u32` version (1), `u32` rows, `u32` cols, then
//! `rows·cols` pairs of `f64` (re, im), row-major.
//!
//! Mask (`IMSK`): magic, `u32` rows, `u32` cols, `u8` kind (0 pixel,
//! 1 column, 2 compressed), `f64` requested ratio, `u64` seed, then one byte
//! per entry (1 observed, 0 missing), row-major.
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::sampling::{Mask, MaskKind};

pub const MATRIX_MAGIC: &[u8; 4] = b"CISR";
pub const MATRIX_VERSION: u32 = 1;
pub const MASK_MAGIC: &[u8; 4] = b"IMSK";

const MATRIX_HEADER: usize = 16;
const MASK_HEADER: usize = 4 + 4 + 4 + 1 + 8 + 8;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.pos..self.pos + N].try_into().expect("length checked");
        self.pos += N;
        out
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}

fn check_magic(bytes: &[u8], magic: &'static [u8; 4]) -> Result<()> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(Error::BadMagic {
            expected: std::str::from_utf8(magic).expect("ascii magic"),
        });
    }
    Ok(())
}

fn payload_len(rows: u32, cols: u32, entry: usize, header: usize) -> Result<usize> {
    (rows as usize)
        .checked_mul(cols as usize)
        .and_then(|n| n.checked_mul(entry))
        .and_then(|n| n.checked_add(header))
        .ok_or(Error::DimensionOverflow {
            rows: rows as u64,
            cols: cols as u64,
        })
}

fn dim_u32(rows: usize, cols: usize) -> Result<(u32, u32)> {
    match (u32::try_from(rows), u32::try_from(cols)) {
        (Ok(r), Ok(c)) => Ok((r, c)),
        _ => Err(Error::DimensionOverflow {
            rows: rows as u64,
            cols: cols as u64,
        }),
    }
}

pub fn encode_matrix(m: &ComplexMatrix) -> Result<Vec<u8>> {
    let (rows, cols) = dim_u32(m.rows(), m.cols())?;
    let mut out = Vec::with_capacity(MATRIX_HEADER + 16 * m.len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for z in m.as_slice() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<ComplexMatrix> {
    check_magic(bytes, MATRIX_MAGIC)?;
    if bytes.len() < MATRIX_HEADER {
        return Err(Error::Truncated {
            expected: MATRIX_HEADER,
            found: bytes.len(),
        });
    }
    let mut r = Reader::new(&bytes[4..]);
    let version = r.u32();
    if version != MATRIX_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let (rows, cols) = (r.u32(), r.u32());
    let expected = payload_len(rows, cols, 16, MATRIX_HEADER)?;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let data = (0..rows as usize * cols as usize)
        .map(|_| {
            let re = r.f64();
            Complex64::new(re, r.f64())
        })
        .collect();
    ComplexMatrix::from_vec(rows as usize, cols as usize, data)
}

pub fn save_matrix(m: &ComplexMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_matrix(m)?)?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<ComplexMatrix> {
    decode_matrix(&fs::read(path)?)
}

pub fn encode_mask(mask: &Mask) -> Result<Vec<u8>> {
    let (rows, cols) = dim_u32(mask.rows(), mask.cols())?;
    let mut out = Vec::with_capacity(MASK_HEADER + mask.observed().len());
    out.extend_from_slice(MASK_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.push(mask.kind.code());
    out.extend_from_slice(&mask.requested_ratio.to_le_bytes());
    out.extend_from_slice(&mask.seed.to_le_bytes());
    out.extend(mask.observed().iter().map(|&b| b as u8));
    Ok(out)
}

pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    check_magic(bytes, MASK_MAGIC)?;
    if bytes.len() < MASK_HEADER {
        return Err(Error::Truncated {
            expected: MASK_HEADER,
            found: bytes.len(),
        });
    }
    let mut r = Reader::new(&bytes[4..]);
    let (rows, cols) = (r.u32(), r.u32());
    let kind = MaskKind::from_code(r.take::<1>()[0])?;
    let ratio = r.f64();
    let seed = r.u64();
    let expected = payload_len(rows, cols, 1, MASK_HEADER)?;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let observed = bytes[MASK_HEADER..]
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::invalid(format!("mask byte {other} is neither 0 nor 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Mask::from_observed(rows as usize, cols as usize, observed, kind, ratio, seed)
}

pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_mask(mask)?)?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    decode_mask(&fs::read(path)?)
}
