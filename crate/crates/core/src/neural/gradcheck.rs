//! Central-difference helpers shared by the gradient tests.

use rand::Rng;

use super::tensor::Tensor3;

pub fn random_tensor(c: usize, h: usize, w: usize, rng: &mut impl Rng) -> Tensor3 {
    let data = (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor3::from_vec(c, h, w, data).unwrap()
}

pub const STEP: f64 = 1e-3;

/// Fourth-order central difference; at [`STEP`] truncation and rounding
/// error are both around 1e-13.
pub fn derivative(mut f: impl FnMut(f64) -> f64, x: f64) -> f64 {
    let h = STEP;
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

pub fn numeric_grad(x: &Tensor3, mut f: impl FnMut(&Tensor3) -> f64) -> Vec<f64> {
    (0..x.as_slice().len())
        .map(|i| {
            derivative(
                |v| {
                    let mut y = x.clone();
                    y.as_mut_slice()[i] = v;
                    f(&y)
                },
                x.as_slice()[i],
            )
        })
        .collect()
}

/// `max |a − n| / max(|a|, |n|, floor)` over paired entries, where `floor`
/// is `1e-4` of the largest gradient so entries that are zero up to rounding
/// do not dominate.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = numeric.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = (1e-4 * scale).max(1e-12);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
