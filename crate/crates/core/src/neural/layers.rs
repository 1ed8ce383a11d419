//! Parameter-free layers: activations, resampling, cropping, instance norm.

use super::tensor::Tensor3;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Swish,
    Identity,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `x · σ(x)`
pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn swish_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

impl Activation {
    pub fn forward(self, x: &Tensor3) -> Tensor3 {
        match self {
            Activation::Identity => x.clone(),
            Activation::Swish => {
                let mut y = x.clone();
                for v in y.as_mut_slice() {
                    *v = swish(*v);
                }
                y
            }
        }
    }

    /// Gradient wrt the pre-activation `x`.
    pub fn backward(self, x: &Tensor3, grad: &Tensor3) -> Tensor3 {
        match self {
            Activation::Identity => grad.clone(),
            Activation::Swish => {
                let mut g = grad.clone();
                for (gv, &xv) in g.as_mut_slice().iter_mut().zip(x.as_slice()) {
                    *gv *= swish_grad(xv);
                }
                g
            }
        }
    }
}

/// Nearest-neighbour 2× upsampling.
pub fn upsample2(x: &Tensor3) -> Tensor3 {
    let (c, h, w) = x.shape();
    let mut out = Tensor3::zeros(c, 2 * h, 2 * w);
    for ch in 0..c {
        let src = x.plane(ch);
        let dst = out.plane_mut(ch);
        for y in 0..2 * h {
            for xx in 0..2 * w {
                dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward(grad: &Tensor3) -> Tensor3 {
    let (c, h2, w2) = grad.shape();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut out = Tensor3::zeros(c, h, w);
    for ch in 0..c {
        let src = grad.plane(ch);
        let dst = out.plane_mut(ch);
        for y in 0..h2 {
            for xx in 0..w2 {
                dst[(y / 2) * w + xx / 2] += src[y * w2 + xx];
            }
        }
    }
    out
}

fn crop_offsets(from: (usize, usize), to: (usize, usize)) -> Result<(usize, usize)> {
    if to.0 > from.0 || to.1 > from.1 {
        return Err(Error::Network(format!("cannot crop {from:?} to {to:?}")));
    }
    Ok(((from.0 - to.0) / 2, (from.1 - to.1) / 2))
}

/// Center crop to `height × width`; odd excess drops the extra row/column at
/// the bottom/right.
pub fn center_crop(x: &Tensor3, height: usize, width: usize) -> Result<Tensor3> {
    let (c, h, w) = x.shape();
    let (oy, ox) = crop_offsets((h, w), (height, width))?;
    let mut out = Tensor3::zeros(c, height, width);
    for ch in 0..c {
        let src = x.plane(ch);
        let dst = out.plane_mut(ch);
        for y in 0..height {
            let s = (y + oy) * w + ox;
            dst[y * width..(y + 1) * width].copy_from_slice(&src[s..s + width]);
        }
    }
    Ok(out)
}

pub fn center_crop_backward(grad: &Tensor3, height: usize, width: usize) -> Result<Tensor3> {
    let (c, gh, gw) = grad.shape();
    let (oy, ox) = crop_offsets((height, width), (gh, gw))?;
    let mut out = Tensor3::zeros(c, height, width);
    for ch in 0..c {
        let src = grad.plane(ch);
        let dst = out.plane_mut(ch);
        for y in 0..gh {
            let d = (y + oy) * width + ox;
            dst[d..d + gw].copy_from_slice(&src[y * gw..(y + 1) * gw]);
        }
    }
    Ok(out)
}

pub const NORM_EPS: f64 = 1e-5;

/// Per-channel standardisation without affine parameters.
pub fn instance_norm(x: &Tensor3) -> Tensor3 {
    let mut y = x.clone();
    let n = x.plane_len() as f64;
    for ch in 0..x.channels() {
        let p = y.plane_mut(ch);
        let mean = p.iter().sum::<f64>() / n;
        let var = p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + NORM_EPS).sqrt();
        for v in p.iter_mut() {
            *v = (*v - mean) * inv;
        }
    }
    y
}

pub fn instance_norm_backward(x: &Tensor3, grad: &Tensor3) -> Tensor3 {
    let y = instance_norm(x);
    let mut out = grad.clone();
    let n = x.plane_len() as f64;
    for ch in 0..x.channels() {
        let xs = x.plane(ch);
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + NORM_EPS).sqrt();
        let ys = y.plane(ch);
        let g = out.plane_mut(ch);
        let g_mean = g.iter().sum::<f64>() / n;
        let gy_mean = g.iter().zip(ys).map(|(a, b)| a * b).sum::<f64>() / n;
        for (gv, &yv) in g.iter_mut().zip(ys) {
            *gv = inv * (*gv - g_mean - yv * gy_mean);
        }
    }
    out
}
