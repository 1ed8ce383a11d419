//! 5×5 cross-correlation with width-2 padding and stride 1 or 2.

use std::cell::RefCell;

use rand::Rng;

use super::tensor::Tensor3;
use crate::error::{Error, Result};

pub const KERNEL: usize = 5;
pub const PAD: usize = 2;
const TAPS: usize = KERNEL * KERNEL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Padding {
    #[default]
    Reflect,
    Zero,
}

/// Mirror index without repeating the edge sample (`-1 → 1`, `n → n-2`).
/// Wraps repeatedly, so any `n >= 1` works.
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    pub stride: usize,
    pub padding: Padding,
    /// `[out][in][ky][kx]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads {
    pub input: Option<Tensor3>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(in_ch: usize, out_ch: usize, stride: usize, padding: Padding) -> Self {
        assert!(stride == 1 || stride == 2, "stride must be 1 or 2");
        Self {
            in_ch,
            out_ch,
            stride,
            padding,
            weight: vec![0.0; out_ch * in_ch * TAPS],
            bias: vec![0.0; out_ch],
        }
    }

    /// Uniform init in `[-a, a]`, `a = sqrt(1 / (in_ch · 25))`, for weights
    /// and biases alike.
    pub fn init_uniform(
        in_ch: usize,
        out_ch: usize,
        stride: usize,
        padding: Padding,
        rng: &mut impl Rng,
    ) -> Self {
        let mut layer = Self::zeros(in_ch, out_ch, stride, padding);
        let a = (1.0 / (in_ch as f64 * TAPS as f64)).sqrt();
        for w in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
            *w = rng.random_range(-a..=a);
        }
        layer
    }

    pub fn kernel(&self, o: usize, i: usize) -> &[f64] {
        let start = (o * self.in_ch + i) * TAPS;
        &self.weight[start..start + TAPS]
    }

    pub fn output_dims(&self, height: usize, width: usize) -> (usize, usize) {
        (
            (height + 2 * PAD - KERNEL) / self.stride + 1,
            (width + 2 * PAD - KERNEL) / self.stride + 1,
        )
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != self.in_ch {
            return Err(Error::Network(format!(
                "conv expects {} input channels, got {}",
                self.in_ch,
                x.channels()
            )));
        }
        if x.height() == 0 || x.width() == 0 {
            return Err(Error::Network("conv input has zero spatial size".into()));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

fn pad(x: &Tensor3, padding: Padding) -> Tensor3 {
    let (c, h, w) = x.shape();
    let (ph, pw) = (h + 2 * PAD, w + 2 * PAD);
    let mut out = Tensor3::zeros(c, ph, pw);
    let rows: Vec<Option<usize>> = (0..ph)
        .map(|y| {
            let src = y as isize - PAD as isize;
            match padding {
                Padding::Reflect => Some(reflect_index(src, h)),
                Padding::Zero => (0..h as isize).contains(&src).then_some(src as usize),
            }
        })
        .collect();
    let cols: Vec<Option<usize>> = (0..pw)
        .map(|xx| {
            let src = xx as isize - PAD as isize;
            match padding {
                Padding::Reflect => Some(reflect_index(src, w)),
                Padding::Zero => (0..w as isize).contains(&src).then_some(src as usize),
            }
        })
        .collect();
    for ch in 0..c {
        let src = x.plane(ch);
        let dst = out.plane_mut(ch);
        for (y, ry) in rows.iter().enumerate() {
            let Some(ry) = *ry else { continue };
            let src_row = &src[ry * w..(ry + 1) * w];
            let dst_row = &mut dst[y * pw..(y + 1) * pw];
            dst_row[PAD..PAD + w].copy_from_slice(src_row);
            for (xx, rx) in cols.iter().enumerate() {
                if xx < PAD || xx >= PAD + w {
                    if let Some(rx) = *rx {
                        dst_row[xx] = src_row[rx];
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`pad`]: folds padded-border gradients back onto their sources.
fn unpad(gp: &Tensor3, h: usize, w: usize, padding: Padding) -> Tensor3 {
    let c = gp.channels();
    let pw = w + 2 * PAD;
    let mut out = Tensor3::zeros(c, h, w);
    for ch in 0..c {
        let src = gp.plane(ch);
        let dst = out.plane_mut(ch);
        for y in 0..h + 2 * PAD {
            let sy = y as isize - PAD as isize;
            let ry = match padding {
                Padding::Reflect => reflect_index(sy, h),
                Padding::Zero if (0..h as isize).contains(&sy) => sy as usize,
                Padding::Zero => continue,
            };
            for xx in 0..pw {
                let sx = xx as isize - PAD as isize;
                let rx = match padding {
                    Padding::Reflect => reflect_index(sx, w),
                    Padding::Zero if (0..w as isize).contains(&sx) => sx as usize,
                    Padding::Zero => continue,
                };
                dst[ry * w + rx] += src[y * pw + xx];
            }
        }
    }
    out
}

/// Unrolls every receptive field of the padded input into a column:
/// `cols[(i·25 + ky·5 + kx), y·wo + x] = padded[i, y·s + ky, x·s + kx]`.
fn im2col(padded: &Tensor3, ho: usize, wo: usize, stride: usize, cols: &mut Vec<f64>) {
    let pw = padded.width();
    cols.clear();
    cols.reserve(padded.channels() * TAPS * ho * wo);
    for i in 0..padded.channels() {
        let src = padded.plane(i);
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                for y in 0..ho {
                    let s = &src[(y * stride + ky) * pw + kx..];
                    if stride == 1 {
                        cols.extend_from_slice(&s[..wo]);
                    } else {
                        cols.extend((0..wo).map(|x| s[x * stride]));
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`], accumulated into a zeroed padded-shape tensor.
fn col2im(cols: &[f64], channels: usize, ph: usize, pw: usize, ho: usize, wo: usize, stride: usize) -> Tensor3 {
    let hw = ho * wo;
    let mut out = Tensor3::zeros(channels, ph, pw);
    for i in 0..channels {
        let dst = out.plane_mut(i);
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &cols[(i * TAPS + ky * KERNEL + kx) * hw..][..hw];
                for y in 0..ho {
                    let d = &mut dst[(y * stride + ky) * pw + kx..];
                    let s = &row[y * wo..(y + 1) * wo];
                    if stride == 1 {
                        for (a, b) in d[..wo].iter_mut().zip(s) {
                            *a += b;
                        }
                    } else {
                        for (x, v) in s.iter().enumerate() {
                            d[x * stride] += v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// `C += A·B` for row-major `C`; `A` and `B` take explicit strides so
/// transposed operands need no copy.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the asserts above bound every index the kernel touches, given
    // the dense row-major or transposed layouts passed by the callers.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Overwrites `c` with the `m × n` product `A·B`.
#[allow(clippy::too_many_arguments)]
fn gemm_into(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut Vec<f64>,
) {
    assert!(a.len() >= m * k && b.len() >= k * n);
    c.clear();
    c.reserve(m * n);
    // SAFETY: with beta = 0 dgemm writes every element of C without reading
    // it, so the spare capacity is fully initialised before `set_len`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
        c.set_len(m * n);
    }
}

thread_local! {
    // Unrolled-column scratch, reused so large layers do not page-fault a
    // fresh buffer on every call.
    static COLS: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
    static GRAD_COLS: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
}

pub fn conv2d_forward(x: &Tensor3, layer: &ConvLayer) -> Result<Tensor3> {
    layer.check_input(x)?;
    let (ho, wo) = layer.output_dims(x.height(), x.width());
    let (hw, k) = (ho * wo, layer.in_ch * TAPS);
    let mut out = Tensor3::zeros(layer.out_ch, ho, wo);
    for o in 0..layer.out_ch {
        out.plane_mut(o).fill(layer.bias[o]);
    }
    COLS.with_borrow_mut(|cols| {
        im2col(&pad(x, layer.padding), ho, wo, layer.stride, cols);
        gemm(
            layer.out_ch,
            k,
            hw,
            &layer.weight,
            (k, 1),
            cols,
            (hw, 1),
            out.as_mut_slice(),
        );
    });
    Ok(out)
}

/// Reverse-mode gradients of [`conv2d_forward`]. The input gradient is only
/// formed when `want_input` is set.
pub fn conv2d_backward(
    x: &Tensor3,
    layer: &ConvLayer,
    grad_out: &Tensor3,
    want_input: bool,
) -> Result<ConvGrads> {
    layer.check_input(x)?;
    let (h, w) = (x.height(), x.width());
    let (ho, wo) = layer.output_dims(h, w);
    if grad_out.shape() != (layer.out_ch, ho, wo) {
        return Err(Error::Network(format!(
            "conv grad_out shape {:?}, expected {:?}",
            grad_out.shape(),
            (layer.out_ch, ho, wo)
        )));
    }
    let (hw, k) = (ho * wo, layer.in_ch * TAPS);
    let g = grad_out.as_slice();

    let grad_b = (0..layer.out_ch).map(|o| grad_out.plane(o).iter().sum()).collect();
    // dW = G · colsᵀ
    let mut grad_w = Vec::new();
    COLS.with_borrow_mut(|cols| {
        im2col(&pad(x, layer.padding), ho, wo, layer.stride, cols);
        gemm_into(layer.out_ch, hw, k, g, (hw, 1), cols, (1, hw), &mut grad_w);
    });

    let input = if want_input {
        // dcols = Wᵀ · G
        let gp = GRAD_COLS.with_borrow_mut(|grad_cols| {
            gemm_into(k, layer.out_ch, hw, &layer.weight, (1, k), g, (hw, 1), grad_cols);
            col2im(grad_cols, layer.in_ch, h + 2 * PAD, w + 2 * PAD, ho, wo, layer.stride)
        });
        Some(unpad(&gp, h, w, layer.padding))
    } else {
        None
    };
    Ok(ConvGrads {
        input,
        weight: grad_w,
        bias: grad_b,
    })
}
