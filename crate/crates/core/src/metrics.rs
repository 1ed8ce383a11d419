//! Image quality scores and noise injection.
//!
//! Scores take real images; complex range-Doppler images are reduced with
//! [`ComplexMatrix::abs`] first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, Matrix, RealMatrix, Scalar};
use num_complex::Complex64;

/// Reported when the residual vanishes.
pub const SNR_CAP_DB: f64 = 300.0;

/// `‖I − Î‖_F / ‖I‖_F`
pub fn rmse(reference: &RealMatrix, estimate: &RealMatrix) -> Result<f64> {
    let norm = reference.frobenius_norm();
    let diff = reference.distance(estimate)?;
    if norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(diff / norm)
}

/// Pearson correlation of the vectorised images (sample statistics).
pub fn correlation(reference: &RealMatrix, estimate: &RealMatrix) -> Result<f64> {
    reference.check_same_dims(estimate)?;
    let n = reference.len();
    if n < 2 {
        return Err(Error::ZeroVariance);
    }
    let (a, b) = (reference.as_slice(), estimate.as_slice());
    let mean_a = a.iter().sum::<f64>() / n as f64;
    let mean_b = b.iter().sum::<f64>() / n as f64;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (x - mean_a, y - mean_b);
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    let denom = (n - 1) as f64;
    let (sa, sb) = ((var_a / denom).sqrt(), (var_b / denom).sqrt());
    if sa == 0.0 || sb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((cov / denom / (sa * sb)).clamp(-1.0, 1.0))
}

/// Mean of `|Î² − μ|` over pixels, divided by `μ = mean(Î²)`.
pub fn image_contrast(image: &RealMatrix) -> Result<f64> {
    if image.is_empty() {
        return Err(Error::EmptyImage);
    }
    let n = image.len() as f64;
    let mu = image.as_slice().iter().map(|v| v * v).sum::<f64>() / n;
    if mu == 0.0 {
        return Err(Error::EmptyImage);
    }
    let dev = image
        .as_slice()
        .iter()
        .map(|v| (v * v - mu).abs())
        .sum::<f64>()
        / n;
    Ok(dev / mu)
}

/// `10·log10(‖ref‖² / ‖ref − est‖²)`, clamped to `±SNR_CAP_DB`.
pub fn snr_db<T: Scalar>(reference: &Matrix<T>, estimate: &Matrix<T>) -> Result<f64> {
    let residual = reference.distance(estimate)?;
    let signal = reference.frobenius_norm();
    if residual == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    if signal == 0.0 {
        return Ok(-SNR_CAP_DB);
    }
    Ok((20.0 * (signal / residual).log10()).clamp(-SNR_CAP_DB, SNR_CAP_DB))
}

/// Adds circular complex Gaussian noise whose power is rescaled so the
/// empirical SNR equals `snr_db` exactly. `+∞` returns the input unchanged.
pub fn add_noise(m: &ComplexMatrix, snr_db: f64, seed: u64) -> Result<ComplexMatrix> {
    if snr_db == f64::INFINITY {
        return Ok(m.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::invalid(format!("invalid target SNR {snr_db}")));
    }
    let power = m.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>();
    if power == 0.0 || !power.is_finite() {
        return Err(Error::ZeroPower);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<Complex64> = (0..m.len())
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    let noise_power = noise.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let gain = (power / 10f64.powf(snr_db / 10.0) / noise_power).sqrt();
    let data = m
        .as_slice()
        .iter()
        .zip(&noise)
        .map(|(z, n)| z + n * gain)
        .collect();
    ComplexMatrix::from_vec(m.rows(), m.cols(), data)
}

/// One scored run.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub method: String,
    pub scenario: String,
    pub ratio: f64,
    pub seed: u64,
    pub rmse: f64,
    pub correlation: f64,
    pub contrast: f64,
    pub snr_db: Option<f64>,
    pub runtime_s: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str =
        "method,scenario,ratio,seed,rmse,correlation,contrast,snr_db,runtime_s,iterations,converged";

    /// Scores `estimate` against `reference` (both complex images).
    pub fn score(reference: &ComplexMatrix, estimate: &ComplexMatrix) -> Result<Scores> {
        let (r, e) = (reference.abs(), estimate.abs());
        Ok(Scores {
            rmse: rmse(&r, &e)?,
            // a flat estimate (e.g. all zeros) has no defined correlation
            correlation: correlation(&r, &e).unwrap_or(0.0),
            contrast: image_contrast(&e).unwrap_or(0.0),
            snr_db: snr_db(&r, &e)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rmse >= 0.0
            && (-1.0..=1.0).contains(&self.correlation)
            && self.contrast >= 0.0
            && self.runtime_s >= 0.0
            && !self.method.is_empty()
            && !self.scenario.is_empty();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("report out of range: {self:?}")))
        }
    }

    /// Fields in [`MetricsReport::CSV_HEADER`] order. Floats use Rust's
    /// shortest round-trip formatting.
    pub fn to_csv_row(&self) -> String {
        let snr = self.snr_db.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.scenario,
            self.ratio,
            self.seed,
            self.rmse,
            self.correlation,
            self.contrast,
            snr,
            self.runtime_s,
            self.iterations,
            self.converged
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub rmse: f64,
    pub correlation: f64,
    pub contrast: f64,
    pub snr_db: f64,
}
