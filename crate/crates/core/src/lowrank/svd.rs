//! One-sided (Hestenes) Jacobi SVD for real and complex matrices.

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Scalar};

const MAX_SWEEPS: usize = 80;
const ORTHO_EPS: f64 = 1e-15;

/// Thin SVD `A = U · diag(S) · Vᴴ` with `k = min(rows, cols)` components.
#[derive(Clone, Debug)]
pub struct SvdFactors<T> {
    /// rows × k, orthonormal columns.
    pub u: Matrix<T>,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// cols × k, orthonormal columns.
    pub v: Matrix<T>,
}

impl<T: Scalar> SvdFactors<T> {
    pub fn rank(&self, tol: f64) -> usize {
        self.s.iter().filter(|&&s| s > tol).count()
    }

    /// `U · diag(weights) · Vᴴ` for arbitrary per-component weights.
    pub fn recompose_with(&self, weights: &[f64]) -> Matrix<T> {
        let (m, n) = (self.u.rows(), self.v.rows());
        let k = self.s.len();
        let mut out = Matrix::zeros(m, n);
        let vh: Vec<Vec<T>> = (0..k)
            .map(|j| (0..n).map(|c| self.v[(c, j)].conj()).collect())
            .collect();
        let data = out.as_mut_slice();
        for (j, &w) in weights.iter().enumerate().take(k) {
            if w == 0.0 {
                continue;
            }
            for r in 0..m {
                let a = self.u[(r, j)].scale(w);
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in data[r * n..(r + 1) * n].iter_mut().zip(&vh[j]) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn recompose(&self) -> Matrix<T> {
        self.recompose_with(&self.s)
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    // aᴴ b
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x.conj() * y)
}

fn norm_sqr<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.abs_sqr()).sum()
}

/// Applies the rotation `[a_i, a_j] ← [c·a_i − s·ã_j, s·a_i + c·ã_j]` with
/// `ã_j = a_j · conj(phase)`.
fn rotate<T: Scalar>(cols: &mut [T], len: usize, i: usize, j: usize, c: f64, s: f64, phase: T) {
    debug_assert!(i < j);
    let (head, tail) = cols.split_at_mut(j * len);
    let ai = &mut head[i * len..(i + 1) * len];
    let aj = &mut tail[..len];
    let ph = phase.conj();
    for (x, y) in ai.iter_mut().zip(aj.iter_mut()) {
        let yt = *y * ph;
        let xi = *x;
        *x = xi.scale(c) - yt.scale(s);
        *y = xi.scale(s) + yt.scale(c);
    }
}

/// Column-major storage of `A` (m × n, m ≥ n) → Jacobi-orthogonalized
/// columns and the accumulated right rotations (column-major n × n).
fn jacobi_tall<T: Scalar>(mut a: Vec<T>, m: usize, n: usize, mut v: Vec<T>) -> Result<(Vec<T>, Vec<T>)> {
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = norm_sqr(&a[i * m..(i + 1) * m]);
                let beta = norm_sqr(&a[j * m..(j + 1) * m]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&a[i * m..(i + 1) * m], &a[j * m..(j + 1) * m]);
                let g = gamma.abs();
                if g <= ORTHO_EPS * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let phase = gamma.unit_phase();
                rotate(&mut a, m, i, j, c, s, phase);
                rotate(&mut v, n, i, j, c, s, phase);
            }
        }
        if !rotated {
            return Ok((a, v));
        }
    }
    Err(Error::SvdNotConverged(MAX_SWEEPS))
}

/// Fills zero columns of a column-major m × k basis with unit vectors
/// orthogonal to the rest (modified Gram–Schmidt against the standard basis).
fn complete_basis<T: Scalar>(u: &mut [T], m: usize, k: usize, filled: &[bool]) {
    let mut have: Vec<usize> = (0..k).filter(|&j| filled[j]).collect();
    let mut e = 0;
    for j in 0..k {
        if filled[j] {
            continue;
        }
        while e < m {
            let mut cand = vec![T::zero(); m];
            cand[e] = T::one();
            e += 1;
            for _ in 0..2 {
                for &h in &have {
                    let col = &u[h * m..(h + 1) * m];
                    let p = dot(col, &cand);
                    for (c, &q) in cand.iter_mut().zip(col) {
                        *c -= q * p;
                    }
                }
            }
            let nrm = norm_sqr(&cand).sqrt();
            if nrm > 1e-6 {
                for (dst, c) in u[j * m..(j + 1) * m].iter_mut().zip(cand) {
                    *dst = c.scale(1.0 / nrm);
                }
                have.push(j);
                break;
            }
        }
    }
}

fn svd_tall<T: Scalar>(a: &Matrix<T>, v0: Option<&Matrix<T>>) -> Result<SvdFactors<T>> {
    let (m, n) = a.dims();
    debug_assert!(m >= n);
    // Start from A·V0 when a previous right basis is available; Jacobi then
    // only has to clean up a nearly orthogonal set of columns.
    let (work, v_init) = match v0 {
        Some(v0) if v0.dims() == (n, n) => {
            let av = a.matmul(v0)?;
            let mut cols = vec![T::zero(); m * n];
            for r in 0..m {
                for c in 0..n {
                    cols[c * m + r] = av[(r, c)];
                }
            }
            let mut vcols = vec![T::zero(); n * n];
            for r in 0..n {
                for c in 0..n {
                    vcols[c * n + r] = v0[(r, c)];
                }
            }
            (cols, vcols)
        }
        _ => {
            let mut cols = vec![T::zero(); m * n];
            for r in 0..m {
                for c in 0..n {
                    cols[c * m + r] = a[(r, c)];
                }
            }
            let mut vcols = vec![T::zero(); n * n];
            for i in 0..n {
                vcols[i * n + i] = T::one();
            }
            (cols, vcols)
        }
    };
    let (cols, vcols) = jacobi_tall(work, m, n, v_init)?;

    let norms: Vec<f64> = (0..n).map(|j| norm_sqr(&cols[j * m..(j + 1) * m]).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));

    let mut u = vec![T::zero(); m * n];
    let mut filled = vec![false; n];
    let mut s = Vec::with_capacity(n);
    let mut v = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        s.push(sigma);
        if sigma > f64::MIN_POSITIVE * 1e20 {
            for r in 0..m {
                u[dst * m + r] = cols[src * m + r].scale(1.0 / sigma);
            }
            filled[dst] = true;
        }
        for r in 0..n {
            v[(r, dst)] = vcols[src * n + r];
        }
    }
    complete_basis(&mut u, m, n, &filled);
    let u = Matrix::from_fn(m, n, |r, c| u[c * m + r]);
    Ok(SvdFactors { u, s, v })
}

pub fn svd<T: Scalar>(a: &Matrix<T>) -> Result<SvdFactors<T>> {
    svd_warm(a, None)
}

/// SVD seeded with a right singular basis from a nearby matrix (a previous
/// solver iterate). The result satisfies the same guarantees as [`svd`].
pub fn svd_warm<T: Scalar>(a: &Matrix<T>, hint: Option<&SvdFactors<T>>) -> Result<SvdFactors<T>> {
    if !a.is_finite() {
        return Err(Error::invalid("svd input contains non-finite entries"));
    }
    let (m, n) = a.dims();
    if m >= n {
        let v0 = hint.map(|h| &h.v).filter(|v| v.dims() == (n, n));
        svd_tall(a, v0)
    } else {
        // A = (Aᴴ)ᴴ = (U' S V'ᴴ)ᴴ = V' S U'ᴴ
        let v0 = hint.map(|h| &h.u).filter(|u| u.dims() == (m, m));
        let f = svd_tall(&a.adjoint(), v0)?;
        Ok(SvdFactors {
            u: f.v,
            s: f.s,
            v: f.u,
        })
    }
}

/// Singular-value soft thresholding `U · diag(max(S − τ, 0)) · Vᴴ`.
pub fn shrink_singular<T: Scalar>(a: &Matrix<T>, tau: f64) -> Result<Matrix<T>> {
    Ok(shrink_with(&svd(a)?, tau).0)
}

/// Thresholds existing factors; also returns the nuclear norm of the result.
pub(crate) fn shrink_with<T: Scalar>(f: &SvdFactors<T>, tau: f64) -> (Matrix<T>, f64) {
    let shrunk: Vec<f64> = f.s.iter().map(|&s| (s - tau).max(0.0)).collect();
    let nuclear = shrunk.iter().sum();
    (f.recompose_with(&shrunk), nuclear)
}

pub fn nuclear_norm<T: Scalar>(a: &Matrix<T>) -> Result<f64> {
    Ok(svd(a)?.s.iter().sum())
}

/// Largest singular value.
pub fn spectral_norm<T: Scalar>(a: &Matrix<T>) -> Result<f64> {
    Ok(svd(a)?.s.first().copied().unwrap_or(0.0))
}
