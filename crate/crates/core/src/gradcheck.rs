//! Central finite differences for checking analytic gradients.

use ndarray::{Array, Dimension};

/// Numerical gradient of a scalar function, one coordinate at a time.
pub fn central_difference<D, F>(x: &Array<f64, D>, step: f64, mut f: F) -> Array<f64, D>
where
    D: Dimension,
    F: FnMut(&Array<f64, D>) -> f64,
{
    let mut probe = x.clone();
    let mut grad = Array::zeros(x.raw_dim());
    for (i, g) in grad.iter_mut().enumerate() {
        let orig = probe.as_slice_memory_order().expect("contiguous")[i];
        probe.as_slice_memory_order_mut().expect("contiguous")[i] = orig + step;
        let up = f(&probe);
        probe.as_slice_memory_order_mut().expect("contiguous")[i] = orig - step;
        let down = f(&probe);
        probe.as_slice_memory_order_mut().expect("contiguous")[i] = orig;
        *g = (up - down) / (2.0 * step);
    }
    grad
}

/// Largest `|a − n| / max(|a|, |n|, floor)` over all entries.
pub fn max_relative_error<D: Dimension>(analytic: &Array<f64, D>, numeric: &Array<f64, D>, floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Step used by the gradient checks in this crate.
pub const FD_STEP: f64 = 1e-5;

/// Relative error with the floor set to a millionth of the largest gradient
/// entry, so entries that are numerically zero are judged on the gradient's scale.
pub fn gradient_error<D: Dimension>(analytic: &Array<f64, D>, numeric: &Array<f64, D>) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    max_relative_error(analytic, numeric, (1e-6 * scale).max(f64::MIN_POSITIVE))
}
