//! Deep-image-prior completion of echo matrices.
//!
//! Each real part is scaled to `[0, 1]` from its observed range, fitted by an
//! untrained [`SkipNet`] driven from fixed Gaussian noise under a masked MSE
//! loss, and mapped back. Complex data runs the two parts through separate
//! networks.

use std::time::Instant;

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, RealMatrix};
use crate::metrics::snr_db;
use crate::neural::{adam_step, AdamState, NetworkConfig, SkipNet, Tensor3};
use crate::sampling::{merge_complex, split_complex, Mask};

#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStop {
    pub enabled: bool,
    pub rel_improve: f64,
    pub patience: usize,
    /// Iterations between SNR evaluations.
    pub check_every: usize,
}

impl Default for EarlyStop {
    fn default() -> Self {
        Self {
            enabled: true,
            rel_improve: 0.01,
            patience: 3,
            check_every: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DipConfig {
    /// Architecture. Its `seed` is replaced by [`DipConfig::seed`].
    pub net: NetworkConfig,
    pub max_iters: usize,
    pub lr: f64,
    pub input_noise_std: f64,
    pub noise_channels: usize,
    pub early_stop: EarlyStop,
    pub seed: u64,
}

impl Default for DipConfig {
    fn default() -> Self {
        Self {
            net: NetworkConfig::default(),
            max_iters: 10_000,
            lr: 1e-3,
            input_noise_std: 0.1,
            noise_channels: 16,
            early_stop: EarlyStop::default(),
            seed: 0,
        }
    }
}

impl DipConfig {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid("learning rate must be finite and non-negative"));
        }
        if !(self.input_noise_std.is_finite() && self.input_noise_std >= 0.0) {
            return Err(Error::invalid("input noise std must be finite and non-negative"));
        }
        if self.noise_channels == 0 {
            return Err(Error::invalid("noise_channels must be at least 1"));
        }
        let es = &self.early_stop;
        if !(es.rel_improve > 0.0 && es.rel_improve < 1.0) {
            return Err(Error::invalid("early-stop rel_improve must be in (0, 1)"));
        }
        if es.patience == 0 || es.check_every == 0 {
            return Err(Error::invalid("early-stop patience and check_every must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizationRecord {
    pub lo: f64,
    pub hi: f64,
    pub degenerate: bool,
}

/// Affine map of `part` sending the observed range onto `[0, 1]`. A constant
/// observed part maps every observed entry to 0.5.
pub fn normalize(part: &RealMatrix, mask: &Mask) -> Result<(RealMatrix, NormalizationRecord)> {
    if part.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            got: part.dims(),
        });
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&v, &obs) in part.as_slice().iter().zip(mask.observed()) {
        if obs {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        return Err(Error::EmptyMask);
    }
    if hi == lo {
        let rec = NormalizationRecord {
            lo,
            hi,
            degenerate: true,
        };
        return Ok((part.map(|v| v - lo + 0.5), rec));
    }
    let span = hi - lo;
    let rec = NormalizationRecord {
        lo,
        hi,
        degenerate: false,
    };
    Ok((part.map(|v| (v - lo) / span), rec))
}

pub fn denormalize(y: &RealMatrix, rec: &NormalizationRecord) -> RealMatrix {
    if rec.degenerate {
        return y.map(|_| rec.lo);
    }
    let span = rec.hi - rec.lo;
    y.map(|v| v * span + rec.lo)
}

/// Mean squared error over observed entries and its gradient (zero off the
/// mask).
pub fn masked_mse(pred: &RealMatrix, target: &RealMatrix, mask: &Mask) -> Result<(f64, RealMatrix)> {
    pred.check_same_dims(target)?;
    if pred.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            got: pred.dims(),
        });
    }
    let count = mask.observed_count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let inv = 1.0 / count as f64;
    let mut loss = 0.0;
    let mut grad = RealMatrix::zeros(pred.rows(), pred.cols());
    for (((g, &p), &t), &obs) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(target.as_slice())
        .zip(mask.observed())
    {
        if obs {
            let d = p - t;
            loss += d * d;
            *g = 2.0 * d * inv;
        }
    }
    Ok((loss * inv, grad))
}

/// True iff each of the last `patience` relative SNR improvements is at most
/// `rel_improve`.
pub fn check_snr_early_stop(history: &[f64], rel_improve: f64, patience: usize) -> bool {
    if patience == 0 || history.len() < patience + 1 {
        return false;
    }
    let tail = &history[history.len() - patience - 1..];
    tail.windows(2).all(|w| {
        let (prev, cur) = (w[0], w[1]);
        if prev == 0.0 {
            return cur <= prev;
        }
        (cur - prev) / prev.abs() <= rel_improve
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    /// Masked MSE in the normalised domain, before that iteration's update.
    pub loss: f64,
    /// SNR of the denormalised output against the observed entries.
    pub snr_db: Option<f64>,
    pub elapsed_s: f64,
}

pub const TRACE_HEADER: &str = "iter,loss,snr_db,elapsed_s";

pub fn trace_to_csv(trace: &[TraceEntry]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for e in trace {
        let snr = e.snr_db.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", e.iter, e.loss, snr, e.elapsed_s));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartResult {
    /// Lowest-loss network output seen, denormalised.
    pub matrix: RealMatrix,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    pub stopped_early: bool,
    pub record: NormalizationRecord,
}

impl PartResult {
    pub fn best_loss(&self) -> Option<f64> {
        self.trace.iter().map(|e| e.loss).reduce(f64::min)
    }
}

fn observed_values(m: &RealMatrix, mask: &Mask) -> RealMatrix {
    let v: Vec<f64> = m
        .as_slice()
        .iter()
        .zip(mask.observed())
        .filter(|(_, &o)| o)
        .map(|(&x, _)| x)
        .collect();
    let n = v.len();
    RealMatrix::from_vec(1, n, v).expect("length matches")
}

/// Fixed network input, `N(0, std²)` per entry.
fn noise_input(cfg: &DipConfig, rows: usize, cols: usize) -> Result<Tensor3> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let normal = Normal::new(0.0, cfg.input_noise_std)
        .map_err(|e| Error::invalid(format!("input noise: {e}")))?;
    let data = (0..cfg.noise_channels * rows * cols)
        .map(|_| normal.sample(&mut rng))
        .collect();
    Tensor3::from_vec(cfg.noise_channels, rows, cols, data)
}

pub fn dip_complete_part(part: &RealMatrix, mask: &Mask, cfg: &DipConfig) -> Result<PartResult> {
    cfg.validate()?;
    if !part.is_finite() {
        return Err(Error::invalid("input part contains non-finite entries"));
    }
    let (target, record) = normalize(part, mask)?;
    if record.degenerate {
        warn!("constant observed part, returning {}", record.lo);
        return Ok(PartResult {
            matrix: denormalize(&target, &record),
            trace: Vec::new(),
            iterations: 0,
            stopped_early: false,
            record,
        });
    }
    let (rows, cols) = part.dims();
    let net_cfg = NetworkConfig {
        seed: cfg.seed,
        ..cfg.net.clone()
    };
    let mut net = SkipNet::new(&net_cfg, cfg.noise_channels)?;
    let z = noise_input(cfg, rows, cols)?;
    let mut adam = AdamState::new(&net.params(), cfg.lr);
    let reference = observed_values(part, mask);

    let start = Instant::now();
    let mut trace = Vec::new();
    let mut history = Vec::new();
    let mut best: Option<(f64, RealMatrix)> = None;
    let mut stopped_early = false;

    for iter in 1..=cfg.max_iters {
        let out = net.forward(&z)?;
        let pred = RealMatrix::from_vec(rows, cols, out.into_vec())?;
        if !pred.is_finite() {
            return Err(Error::Network(format!("non-finite output at iteration {iter}")));
        }
        let (loss, grad) = masked_mse(&pred, &target, mask)?;
        let grad = Tensor3::from_vec(1, rows, cols, grad.into_vec())?;
        let grads = net.backward(&grad, false)?;
        adam_step(&mut net.params_mut(), &grads.tensors, &mut adam)?;

        let snr = if iter % cfg.early_stop.check_every == 0 {
            let estimate = observed_values(&denormalize(&pred, &record), mask);
            Some(snr_db(&reference, &estimate)?)
        } else {
            None
        };
        if best.as_ref().is_none_or(|(l, _)| loss < *l) {
            best = Some((loss, pred));
        }
        trace.push(TraceEntry {
            iter,
            loss,
            snr_db: snr,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        if let Some(s) = snr {
            history.push(s);
            debug!("dip iter {iter}: loss {loss:.3e}, snr {s:.2} dB");
            let es = &cfg.early_stop;
            if es.enabled && check_snr_early_stop(&history, es.rel_improve, es.patience) {
                stopped_early = true;
                break;
            }
        }
    }

    let (_, best_pred) = best.expect("max_iters >= 1");
    Ok(PartResult {
        matrix: denormalize(&best_pred, &record),
        iterations: trace.len(),
        trace,
        stopped_early,
        record,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexResult {
    pub matrix: ComplexMatrix,
    pub real: PartResult,
    pub imag: PartResult,
}

impl ComplexResult {
    /// Iterations of the longer-running part.
    pub fn iterations(&self) -> usize {
        self.real.iterations.max(self.imag.iterations)
    }

    pub fn stopped_early(&self) -> bool {
        self.real.stopped_early && self.imag.stopped_early
    }
}

/// Completes real and imaginary parts independently (seeds `seed` and
/// `seed ^ 1`) and recombines them.
pub fn dip_complete_complex(m: &ComplexMatrix, mask: &Mask, cfg: &DipConfig) -> Result<ComplexResult> {
    cfg.validate()?;
    let (re, im) = split_complex(m);
    let imag_cfg = DipConfig {
        seed: cfg.seed ^ 1,
        ..cfg.clone()
    };
    let (real, imag) = rayon::join(
        || dip_complete_part(&re, mask, cfg),
        || dip_complete_part(&im, mask, &imag_cfg),
    );
    let (real, imag) = (real?, imag?);
    Ok(ComplexResult {
        matrix: merge_complex(&real.matrix, &imag.matrix)?,
        real,
        imag,
    })
}
