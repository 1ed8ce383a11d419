//! Stepped-frequency ISAR echo simulation and range-Doppler imaging.
//!
//! The echo kernel carries a negative phase,
//! `Y(m, n) = Σ α · exp(−j2π p m / M) · exp(−j2π q n / N)`, so the image is the
//! unnormalized *forward* 2-D DFT of the echo matrix and a lone scatterer at
//! grid cell `(p, q)` lands on pixel `(p, q)` with value `M·N·α`.

use std::collections::HashSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, RealMatrix};

pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

#[derive(Clone, Debug, PartialEq)]
pub struct RadarParams {
    /// Initial frequency (Hz).
    pub f0: f64,
    /// Frequency step (Hz).
    pub delta_f: f64,
    /// Number of frequency steps N (matrix columns).
    pub n_freq: usize,
    /// Number of aperture steps M (matrix rows).
    pub n_angle: usize,
    /// Rotation step (rad).
    pub delta_theta: f64,
    /// Propagation speed (m/s).
    pub c: f64,
}

impl Default for RadarParams {
    /// X-band turntable geometry: 9.6 GHz, 3 MHz steps, 0.05° per aperture step.
    fn default() -> Self {
        Self {
            f0: 9.6e9,
            delta_f: 3e6,
            n_freq: 64,
            n_angle: 64,
            delta_theta: 0.05_f64.to_radians(),
            c: SPEED_OF_LIGHT,
        }
    }
}

impl RadarParams {
    pub fn with_grid(n_angle: usize, n_freq: usize) -> Self {
        Self {
            n_angle,
            n_freq,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_freq == 0 || self.n_angle == 0 {
            return Err(Error::invalid("n_freq and n_angle must be at least 1"));
        }
        for (name, v) in [
            ("f0", self.f0),
            ("delta_f", self.delta_f),
            ("delta_theta", self.delta_theta),
            ("c", self.c),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Frequency of step `n` (0-based).
    pub fn frequency(&self, n: usize) -> f64 {
        self.f0 + n as f64 * self.delta_f
    }

    /// Range resolution Δy = c / (2 N Δf).
    pub fn range_resolution(&self) -> f64 {
        self.c / (2.0 * self.n_freq as f64 * self.delta_f)
    }

    /// Cross-range resolution Δx = c / (2 M Δθ).
    pub fn cross_range_resolution(&self) -> f64 {
        self.c / (2.0 * self.n_angle as f64 * self.delta_theta)
    }
}

/// Point scatterer on the image grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scatterer {
    /// Cross-range cell, `0 <= p < M`.
    pub p: usize,
    /// Range cell, `0 <= q < N`.
    pub q: usize,
    pub alpha: Complex64,
}

impl Scatterer {
    pub fn new(p: usize, q: usize, alpha: Complex64) -> Self {
        Self { p, q, alpha }
    }

    /// Physical (x, y) position in metres for the given radar.
    pub fn position(&self, params: &RadarParams) -> (f64, f64) {
        (
            self.p as f64 * params.cross_range_resolution(),
            self.q as f64 * params.range_resolution(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub params: RadarParams,
    pub scatterers: Vec<Scatterer>,
}

impl Scene {
    pub fn new(params: RadarParams, scatterers: Vec<Scatterer>) -> Self {
        Self { params, scatterers }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        for (k, s) in self.scatterers.iter().enumerate() {
            if s.p >= self.params.n_angle || s.q >= self.params.n_freq {
                return Err(Error::invalid(format!(
                    "scatterer {k} at ({}, {}) outside {}x{} grid",
                    s.p, s.q, self.params.n_angle, self.params.n_freq
                )));
            }
            if !(s.alpha.re.is_finite() && s.alpha.im.is_finite()) {
                return Err(Error::invalid(format!("scatterer {k} has non-finite reflectivity")));
            }
        }
        Ok(())
    }

    /// `k` unit-magnitude scatterers with random phases at distinct cells
    /// anywhere on the grid.
    pub fn random(params: RadarParams, k: usize, seed: u64) -> Result<Self> {
        params.validate()?;
        let (m, n) = (params.n_angle, params.n_freq);
        if k > m * n {
            return Err(Error::invalid(format!("cannot place {k} distinct scatterers on {m}x{n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::new();
        let mut scatterers = Vec::with_capacity(k);
        while scatterers.len() < k {
            let (p, q) = (rng.random_range(0..m), rng.random_range(0..n));
            if seen.insert((p, q)) {
                let phase = rng.random_range(0.0..2.0 * PI);
                scatterers.push(Scatterer::new(p, q, Complex64::from_polar(1.0, phase)));
            }
        }
        Ok(Self::new(params, scatterers))
    }

    /// `k` scatterers at distinct cells within `extent` cells of the scene
    /// centre (grid cell 0 after wrap-around, the centre of a shifted image).
    /// Magnitudes are uniform in [0.5, 1], phases uniform.
    ///
    /// A compact target near the rotation centre is what motion-compensated
    /// ISAR data looks like; its echo is smooth across both axes.
    pub fn random_compact(params: RadarParams, k: usize, extent: usize, seed: u64) -> Result<Self> {
        params.validate()?;
        let (m, n) = (params.n_angle, params.n_freq);
        let span_p = (2 * extent + 1).min(m);
        let span_q = (2 * extent + 1).min(n);
        if k > span_p * span_q {
            return Err(Error::invalid(format!(
                "cannot place {k} distinct scatterers within extent {extent}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::new();
        let mut scatterers = Vec::with_capacity(k);
        while scatterers.len() < k {
            let dp = rng.random_range(0..span_p) as i64 - (span_p / 2) as i64;
            let dq = rng.random_range(0..span_q) as i64 - (span_q / 2) as i64;
            let p = dp.rem_euclid(m as i64) as usize;
            let q = dq.rem_euclid(n as i64) as usize;
            if seen.insert((p, q)) {
                let mag = rng.random_range(0.5..=1.0);
                let phase = rng.random_range(0.0..2.0 * PI);
                scatterers.push(Scatterer::new(p, q, Complex64::from_polar(mag, phase)));
            }
        }
        Ok(Self::new(params, scatterers))
    }
}

/// Echo matrix (M angles × N frequencies) of a point-scatterer scene.
pub fn simulate_echo(scene: &Scene) -> Result<ComplexMatrix> {
    scene.validate()?;
    let (m, n) = (scene.params.n_angle, scene.params.n_freq);
    let mut out = ComplexMatrix::zeros(m, n);
    let mut row_phase = vec![Complex64::new(0.0, 0.0); m];
    let mut col_phase = vec![Complex64::new(0.0, 0.0); n];
    for s in &scene.scatterers {
        // Reduce p·m modulo M before scaling so large grids keep full precision.
        for (i, v) in row_phase.iter_mut().enumerate() {
            let k = (s.p * i) % m;
            *v = Complex64::from_polar(1.0, -2.0 * PI * k as f64 / m as f64);
        }
        for (i, v) in col_phase.iter_mut().enumerate() {
            let k = (s.q * i) % n;
            *v = s.alpha * Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64);
        }
        for (r, &rp) in row_phase.iter().enumerate() {
            for (o, &cp) in out.as_mut_slice()[r * n..(r + 1) * n].iter_mut().zip(&col_phase) {
                *o += rp * cp;
            }
        }
    }
    Ok(out)
}

/// Unnormalized 2-D DFT with kernel `exp(+j2π(um/M + vn/N))`, so a lone
/// scatterer at `(p, q)` lands on pixel `(p, q)` with value `M·N·α`.
pub fn rd_image(echo: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !echo.is_finite() {
        return Err(Error::invalid("echo matrix contains non-finite entries"));
    }
    let (rows, cols) = echo.dims();
    let mut data = echo.clone().into_vec();
    if data.is_empty() {
        return Ok(echo.clone());
    }
    let mut planner = FftPlanner::<f64>::new();
    // Matched filter for the model kernel: positive-sign, unnormalized.
    let row_fft = planner.plan_fft_inverse(cols);
    row_fft.process(&mut data);

    let col_fft = planner.plan_fft_inverse(rows);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
    ComplexMatrix::from_vec(rows, cols, data)
}

/// `20·log10(|x| / max|x|)` clamped to `[−top_db, 0]`.
pub fn to_db_image(image: &ComplexMatrix, top_db: f64) -> Result<RealMatrix> {
    if !(top_db.is_finite() && top_db > 0.0) {
        return Err(Error::invalid(format!("top_db must be positive, got {top_db}")));
    }
    let mag = image.abs();
    let peak = mag.as_slice().iter().copied().fold(0.0_f64, f64::max);
    if peak.is_nan() || peak <= 0.0 || !peak.is_finite() {
        return Err(Error::EmptyImage);
    }
    Ok(mag.map(|a| {
        let db = 20.0 * (a / peak).log10();
        // log10(0) = -inf clamps to the floor.
        db.clamp(-top_db, 0.0)
    }))
}

/// Moves the zero-frequency cell to the centre (`floor(len/2)`) on both axes.
pub fn fftshift<T: crate::matrix::Scalar>(m: &crate::matrix::Matrix<T>) -> crate::matrix::Matrix<T> {
    let (rows, cols) = m.dims();
    let (sr, sc) = (rows / 2, cols / 2);
    crate::matrix::Matrix::from_fn(rows, cols, |r, c| {
        m[((r + rows - sr) % rows, (c + cols - sc) % cols)]
    })
}

/// Indices of the `k` largest-magnitude pixels, largest first.
pub fn top_pixels(image: &ComplexMatrix, k: usize) -> Vec<(usize, usize)> {
    let mut idx: Vec<usize> = (0..image.len()).collect();
    let data = image.as_slice();
    idx.sort_by(|&a, &b| data[b].norm().total_cmp(&data[a].norm()).then(a.cmp(&b)));
    idx.truncate(k);
    idx.into_iter().map(|i| (i / image.cols(), i % image.cols())).collect()
}
