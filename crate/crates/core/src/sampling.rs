//! Observation masks, the sampling operator and the entry-scatter
//! pre-transformation used before column-wise low-rank completion.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`)
//! consumed only through `next_u64`. Bounded draws use rejection sampling:
//! `limit = floor(2^64 / n) * n`, redraw while `x >= limit`, return `x % n`.
//! Selections are partial Fisher–Yates: for `i` in `0..k`, swap `i` with
//! `i + below(len - i)`; the first `k` items of the shuffled index list are
//! selected.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, Matrix, RealMatrix, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MaskKind {
    /// Randomly scattered missing entries.
    Pixel,
    /// Whole missing columns.
    Column,
    /// Whole missing rows and whole missing columns.
    Compressed,
}

impl MaskKind {
    pub const ALL: [MaskKind; 3] = [MaskKind::Pixel, MaskKind::Column, MaskKind::Compressed];

    pub fn code(self) -> u8 {
        match self {
            MaskKind::Pixel => 0,
            MaskKind::Column => 1,
            MaskKind::Compressed => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(MaskKind::Pixel),
            1 => Ok(MaskKind::Column),
            2 => Ok(MaskKind::Compressed),
            other => Err(Error::invalid(format!("unknown mask kind code {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MaskKind::Pixel => "pixel",
            MaskKind::Column => "column",
            MaskKind::Compressed => "compressed",
        }
    }
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pixel" => Ok(MaskKind::Pixel),
            "column" => Ok(MaskKind::Column),
            "compressed" => Ok(MaskKind::Compressed),
            other => Err(Error::invalid(format!("unknown mask kind '{other}'"))),
        }
    }
}

/// Observation pattern Ω. `true` marks an observed entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    observed: Vec<bool>,
    pub kind: MaskKind,
    pub requested_ratio: f64,
    pub seed: u64,
}

impl Mask {
    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            observed: vec![true; rows * cols],
            kind: MaskKind::Pixel,
            requested_ratio: 0.0,
            seed: 0,
        }
    }

    pub fn from_observed(
        rows: usize,
        cols: usize,
        observed: Vec<bool>,
        kind: MaskKind,
        requested_ratio: f64,
        seed: u64,
    ) -> Result<Self> {
        if rows.checked_mul(cols) != Some(observed.len()) {
            return Err(Error::invalid(format!(
                "mask length {} does not match {rows}x{cols}",
                observed.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            observed,
            kind,
            requested_ratio,
            seed,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn is_observed(&self, r: usize, c: usize) -> bool {
        self.observed[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.observed[r * self.cols + c] = value;
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&b| b).count()
    }

    pub fn missing_count(&self) -> usize {
        self.observed.len() - self.observed_count()
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.observed.is_empty() {
            0.0
        } else {
            self.missing_count() as f64 / self.observed.len() as f64
        }
    }

    pub fn row_observed_counts(&self) -> Vec<usize> {
        self.observed
            .chunks(self.cols.max(1))
            .map(|row| row.iter().filter(|&&b| b).count())
            .collect()
    }

    pub fn col_observed_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.cols];
        for (i, &b) in self.observed.iter().enumerate() {
            if b {
                counts[i % self.cols] += 1;
            }
        }
        counts
    }

    /// True when every row and every column has at least one observed entry.
    pub fn covers_all_lines(&self) -> bool {
        self.row_observed_counts().iter().all(|&c| c > 0)
            && self.col_observed_counts().iter().all(|&c| c > 0)
    }

    /// Mask as a 0/1 real matrix.
    pub fn to_matrix(&self) -> RealMatrix {
        RealMatrix::from_fn(self.rows, self.cols, |r, c| {
            if self.is_observed(r, c) {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Uniform integer in `0..n` (n >= 1) from raw 64-bit outputs.
pub(crate) fn uniform_below(rng: &mut impl RngCore, n: u64) -> u64 {
    debug_assert!(n > 0);
    let limit = (u64::MAX / n) * n;
    loop {
        let x = rng.next_u64();
        if x < limit {
            return x % n;
        }
    }
}

/// First `k` entries of a partial Fisher–Yates shuffle of `0..len`.
fn select(rng: &mut impl RngCore, len: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..k {
        let j = i + uniform_below(rng, (len - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

fn round_count(ratio: f64, n: usize) -> usize {
    // f64::round is half-away-from-zero.
    ((ratio * n as f64).round() as usize).min(n)
}

pub fn gen_mask(kind: MaskKind, ratio: f64, rows: usize, cols: usize, seed: u64) -> Result<Mask> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::invalid(format!("missing ratio must be in [0, 1), got {ratio}")));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("mask dimensions must be at least 1x1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = vec![true; rows * cols];
    match kind {
        MaskKind::Pixel => {
            let k = round_count(ratio, rows * cols);
            for i in select(&mut rng, rows * cols, k) {
                observed[i] = false;
            }
        }
        MaskKind::Column => {
            let k = round_count(ratio, cols);
            if k == cols {
                return Err(Error::NoObservedColumn);
            }
            for c in select(&mut rng, cols, k) {
                for r in 0..rows {
                    observed[r * cols + c] = false;
                }
            }
        }
        MaskKind::Compressed => {
            let kr = round_count(ratio, rows);
            let kc = round_count(ratio, cols);
            if kr == rows {
                return Err(Error::NoObservedRow);
            }
            if kc == cols {
                return Err(Error::NoObservedColumn);
            }
            for r in select(&mut rng, rows, kr) {
                observed[r * cols..(r + 1) * cols].fill(false);
            }
            for c in select(&mut rng, cols, kc) {
                for r in 0..rows {
                    observed[r * cols + c] = false;
                }
            }
        }
    }
    Mask::from_observed(rows, cols, observed, kind, ratio, seed)
}

/// Sampling operator P_Ω: keeps observed entries, zeroes the rest.
pub fn apply_mask<T: Scalar>(m: &Matrix<T>, mask: &Mask) -> Result<Matrix<T>> {
    if m.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: m.dims(),
            got: mask.dims(),
        });
    }
    let data = m
        .as_slice()
        .iter()
        .zip(mask.observed())
        .map(|(&v, &obs)| if obs { v } else { T::zero() })
        .collect();
    Matrix::from_vec(m.rows(), m.cols(), data)
}

/// Entry permutation over a flattened matrix: `permuted[i] = original[forward[i]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn from_forward(forward: Vec<usize>) -> Result<Self> {
        let mut inverse = vec![usize::MAX; forward.len()];
        for (i, &f) in forward.iter().enumerate() {
            if f >= forward.len() || inverse[f] != usize::MAX {
                return Err(Error::invalid("not a permutation"));
            }
            inverse[f] = i;
        }
        Ok(Self { forward, inverse })
    }

    pub fn identity(len: usize) -> Self {
        Self {
            forward: (0..len).collect(),
            inverse: (0..len).collect(),
        }
    }

    /// Uniform random permutation (full Fisher–Yates).
    pub fn random(len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let forward = select(&mut rng, len, len.saturating_sub(1));
        let mut forward = forward;
        // `select` truncates to k; the last slot is whatever remains.
        let mut used = vec![false; len];
        for &f in &forward {
            used[f] = true;
        }
        forward.extend((0..len).filter(|&i| !used[i]));
        Self::from_forward(forward).expect("fisher-yates yields a permutation")
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn apply<T: Copy>(&self, values: &[T]) -> Vec<T> {
        self.forward.iter().map(|&f| values[f]).collect()
    }

    pub fn unapply<T: Copy>(&self, values: &[T]) -> Vec<T> {
        self.inverse.iter().map(|&i| values[i]).collect()
    }
}

const PRETRANSFORM_ATTEMPTS: u64 = 16;

/// Scatters the entries of `m` and `mask` with a seeded uniform permutation
/// so that every row and column of the permuted mask holds an observation.
/// Redraws with `seed + 1, seed + 2, …` up to 16 attempts.
pub fn pretransform<T: Scalar>(
    m: &Matrix<T>,
    mask: &Mask,
    seed: u64,
) -> Result<(Matrix<T>, Mask, Permutation)> {
    if m.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: m.dims(),
            got: mask.dims(),
        });
    }
    let (rows, cols) = m.dims();
    for attempt in 0..PRETRANSFORM_ATTEMPTS {
        let perm = Permutation::random(rows * cols, seed.wrapping_add(attempt));
        let observed = perm.apply(mask.observed());
        let permuted_mask =
            Mask::from_observed(rows, cols, observed, mask.kind, mask.requested_ratio, mask.seed)?;
        if permuted_mask.covers_all_lines() {
            let permuted = Matrix::from_vec(rows, cols, perm.apply(m.as_slice()))?;
            return Ok((permuted, permuted_mask, perm));
        }
    }
    Err(Error::PatternTooSparse)
}

pub fn invert_pretransform<T: Scalar>(m: &Matrix<T>, perm: &Permutation) -> Result<Matrix<T>> {
    if m.len() != perm.len() {
        return Err(Error::invalid(format!(
            "permutation of {} entries applied to {} entries",
            perm.len(),
            m.len()
        )));
    }
    Matrix::from_vec(m.rows(), m.cols(), perm.unapply(m.as_slice()))
}

/// Same as [`invert_pretransform`] for masks.
pub fn invert_mask_pretransform(mask: &Mask, perm: &Permutation) -> Result<Mask> {
    if mask.observed().len() != perm.len() {
        return Err(Error::invalid("permutation size does not match mask"));
    }
    Mask::from_observed(
        mask.rows(),
        mask.cols(),
        perm.unapply(mask.observed()),
        mask.kind,
        mask.requested_ratio,
        mask.seed,
    )
}

pub fn split_complex(m: &ComplexMatrix) -> (RealMatrix, RealMatrix) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

pub fn merge_complex(re: &RealMatrix, im: &RealMatrix) -> Result<ComplexMatrix> {
    re.check_same_dims(im)?;
    let data = re
        .as_slice()
        .iter()
        .zip(im.as_slice())
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    ComplexMatrix::from_vec(re.rows(), re.cols(), data)
}
