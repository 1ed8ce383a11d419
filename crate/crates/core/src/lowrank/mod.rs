//! Low-rank completion of partially observed matrices.
//!
//! * [`complete_nnm`]: nuclear-norm minimization by singular value
//!   thresholding (proximal gradient) with threshold continuation, for real
//!   matrices.
//! * [`complete_ialm`]: inexact augmented Lagrange multipliers, usable
//!   directly on complex matrices.

mod svd;

pub use svd::{nuclear_norm, shrink_singular, spectral_norm, svd, svd_warm, SvdFactors};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, RealMatrix, Scalar};
use crate::sampling::{apply_mask, Mask};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Observed-entry fidelity bound on ‖P_Ω(Z − M)‖_F. `None`: 1e−6·‖P_Ω(M)‖_F.
    pub delta: Option<f64>,
    pub max_iters: usize,
    /// Relative-change stopping tolerance.
    pub tol: f64,
    /// Initial NNM threshold. `None`: ‖P_Ω(M)‖_F / 4.
    pub tau: Option<f64>,
    /// Smallest NNM threshold reached by continuation. `None`: δ / √min(m, n),
    /// which bounds the fixed-point residual by δ.
    pub tau_min: Option<f64>,
    /// Threshold decay factor in (0, 1], applied each time the iterate
    /// settles at the current threshold; 1 disables continuation.
    pub tau_decay: f64,
    /// NNM gradient step.
    pub step: f64,
    /// Initial IALM penalty. `None`: 1 / ‖P_Ω(M)‖₂.
    pub mu0: Option<f64>,
    /// IALM penalty growth factor.
    pub rho: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            delta: None,
            max_iters: 10_000,
            tol: 1e-5,
            tau: None,
            tau_min: None,
            tau_decay: 0.8,
            step: 1.0,
            mu0: None,
            rho: 1.1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x.is_finite() && x > 0.0) => {
                Err(Error::invalid(format!("{name} must be positive, got {x}")))
            }
            _ => Ok(()),
        };
        positive("delta", self.delta)?;
        positive("tau", self.tau)?;
        positive("tau_min", self.tau_min)?;
        positive("mu0", self.mu0)?;
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::invalid(format!("tol must be in (0, 1), got {}", self.tol)));
        }
        if !(self.tau_decay > 0.0 && self.tau_decay <= 1.0) {
            return Err(Error::invalid("tau_decay must be in (0, 1]"));
        }
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::invalid("step must be in (0, 1]"));
        }
        if self.rho.is_nan() || self.rho <= 1.0 {
            return Err(Error::invalid(format!("rho must exceed 1, got {}", self.rho)));
        }
        Ok(())
    }
}

/// Output of a completion solver.
#[derive(Clone, Debug)]
pub struct Completion<T> {
    pub matrix: Matrix<T>,
    pub iterations: usize,
    /// The stopping rule fired before `max_iters`.
    pub converged: bool,
    /// ‖P_Ω(Z − M)‖_F
    pub residual: f64,
    pub delta: f64,
    /// Some row or column of the mask has no observation, so the low-rank
    /// model cannot determine it (the solver leaves it near zero).
    pub unobserved_lines: bool,
    /// Per-iteration objective (NNM: τ‖Z‖_* + ½‖P_Ω(Z − M)‖²_F at the
    /// threshold in force; IALM: ‖Z‖_*).
    pub objective: Vec<f64>,
}

impl<T> Completion<T> {
    /// Converged on a pattern the model can actually complete.
    pub fn succeeded(&self) -> bool {
        self.converged && !self.unobserved_lines
    }
}

fn check_inputs<T: Scalar>(m_obs: &Matrix<T>, mask: &Mask, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if m_obs.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: m_obs.dims(),
            got: mask.dims(),
        });
    }
    if mask.observed_count() == 0 {
        return Err(Error::EmptyMask);
    }
    if !m_obs.is_finite() {
        return Err(Error::invalid("observed matrix contains non-finite entries"));
    }
    Ok(())
}

fn masked_residual<T: Scalar>(z: &Matrix<T>, target: &Matrix<T>, mask: &Mask) -> f64 {
    z.as_slice()
        .iter()
        .zip(target.as_slice())
        .zip(mask.observed())
        .filter(|(_, &o)| o)
        .map(|((&a, &b), _)| (a - b).abs_sqr())
        .sum::<f64>()
        .sqrt()
}

fn trivial<T: Scalar>(rows: usize, cols: usize, mask: &Mask, delta: f64) -> Completion<T> {
    Completion {
        matrix: Matrix::zeros(rows, cols),
        iterations: 0,
        converged: true,
        residual: 0.0,
        delta,
        unobserved_lines: !mask.covers_all_lines(),
        objective: Vec::new(),
    }
}

/// Nuclear-norm completion of a real matrix:
/// `Z ← shrink(Z + step·P_Ω(M − Z), τ)` from `Z = 0`. Whenever the
/// relative change drops below `tol`, `τ` is multiplied by `tau_decay`
/// until it reaches `tau_min`.
///
/// Stops once the threshold has reached its floor, the relative change
/// `‖Z_{k+1} − Z_k‖_F / ‖Z_k‖_F` is below `tol`, and the observed-entry
/// residual is at most δ. Otherwise returns the last iterate with
/// `converged = false`.
pub fn complete_nnm(m_obs: &RealMatrix, mask: &Mask, cfg: &SolverConfig) -> Result<Completion<f64>> {
    check_inputs(m_obs, mask, cfg)?;
    let target = apply_mask(m_obs, mask)?;
    let (rows, cols) = target.dims();
    let scale = target.frobenius_norm();
    let delta = cfg.delta.unwrap_or(1e-6 * scale);
    if scale == 0.0 {
        return Ok(trivial(rows, cols, mask, delta));
    }
    let tau_min = cfg
        .tau_min
        .unwrap_or(delta / (rows.min(cols) as f64).sqrt());
    let mut tau = cfg.tau.unwrap_or(scale / 4.0).max(tau_min);

    let mut z = RealMatrix::zeros(rows, cols);
    let mut hint: Option<SvdFactors<f64>> = None;
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = scale;

    for _ in 0..cfg.max_iters {
        iterations += 1;
        let mut g = z.clone();
        for ((gv, &t), &obs) in g
            .as_mut_slice()
            .iter_mut()
            .zip(target.as_slice())
            .zip(mask.observed())
        {
            if obs {
                *gv += cfg.step * (t - *gv);
            }
        }
        let f = svd_warm(&g, hint.as_ref())?;
        let (next, nuclear) = svd::shrink_with(&f, tau);
        hint = Some(f);

        let change = next.distance(&z)?;
        let base = z.frobenius_norm();
        residual = masked_residual(&next, &target, mask);
        objective.push(tau * nuclear + 0.5 * residual * residual);
        z = next;

        let settled = base > 0.0 && change / base < cfg.tol;
        if !settled {
            continue;
        }
        if tau <= tau_min {
            if residual <= delta {
                converged = true;
                break;
            }
        } else {
            tau = (tau * cfg.tau_decay).max(tau_min);
        }
    }

    Ok(Completion {
        matrix: z,
        iterations,
        converged,
        residual,
        delta,
        unobserved_lines: !mask.covers_all_lines(),
        objective,
    })
}

/// Inexact ALM for `min ‖Z‖_*  s.t.  P_Ω(Z) = P_Ω(M)` on real or complex
/// data. `E` carries the unobserved complement and `Y` the multiplier:
///
/// ```text
/// Z ← shrink(D − E + Y/μ, 1/μ)
/// E ← P_Ωᶜ(D − Z + Y/μ)
/// Y ← Y + μ(D − Z − E)
/// μ ← ρμ
/// ```
///
/// with `D = P_Ω(M)`; stops when `‖D − Z − E‖_F / ‖D‖_F < tol`.
pub fn complete_ialm<T: Scalar>(
    m_obs: &Matrix<T>,
    mask: &Mask,
    cfg: &SolverConfig,
) -> Result<Completion<T>> {
    check_inputs(m_obs, mask, cfg)?;
    let d = apply_mask(m_obs, mask)?;
    let (rows, cols) = d.dims();
    let d_norm = d.frobenius_norm();
    let delta = cfg.delta.unwrap_or(1e-6 * d_norm);
    if d_norm == 0.0 {
        return Ok(trivial(rows, cols, mask, delta));
    }
    let mut mu = match cfg.mu0 {
        Some(mu) => mu,
        None => 1.0 / spectral_norm(&d)?,
    };

    let mut z = Matrix::<T>::zeros(rows, cols);
    let mut e = Matrix::<T>::zeros(rows, cols);
    let mut y = Matrix::<T>::zeros(rows, cols);
    let mut hint: Option<SvdFactors<T>> = None;
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        iterations += 1;
        let inv_mu = 1.0 / mu;
        let mut g = d.clone();
        for ((gv, &ev), &yv) in g.as_mut_slice().iter_mut().zip(e.as_slice()).zip(y.as_slice()) {
            *gv = *gv - ev + yv.scale(inv_mu);
        }
        let f = svd_warm(&g, hint.as_ref())?;
        let (next_z, nuclear) = svd::shrink_with(&f, inv_mu);
        hint = Some(f);
        z = next_z;
        objective.push(nuclear);

        for (i, &obs) in mask.observed().iter().enumerate() {
            let ev = &mut e.as_mut_slice()[i];
            *ev = if obs {
                T::zero()
            } else {
                d.as_slice()[i] - z.as_slice()[i] + y.as_slice()[i].scale(inv_mu)
            };
        }
        let mut r_norm2 = 0.0;
        for (i, yv) in y.as_mut_slice().iter_mut().enumerate() {
            let r = d.as_slice()[i] - z.as_slice()[i] - e.as_slice()[i];
            r_norm2 += r.abs_sqr();
            *yv += r.scale(mu);
        }
        mu *= cfg.rho;
        if r_norm2.sqrt() / d_norm < cfg.tol {
            converged = true;
            break;
        }
    }

    let residual = masked_residual(&z, &d, mask);
    Ok(Completion {
        matrix: z,
        iterations,
        converged,
        residual,
        delta,
        unobserved_lines: !mask.covers_all_lines(),
        objective,
    })
}
