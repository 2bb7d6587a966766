//! Active rotating filters and oriented-response pooling as dense kernels.
//!
//! Orientation features are laid out `N×H×W` and filter banks `N×k×k`.
//! Spatial rotation is clockwise on screen (rows grow downward). Quarter
//! turns are exact index permutations; other angles rotate each square ring
//! of the kernel by linear interpolation along the ring, which for `N = 8`
//! is itself an exact cell shift.

use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3, Axis};

use crate::error::{Error, Result};

/// A `k×k×N` filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct Arf {
    weights: Array3<f64>,
}

impl Arf {
    pub fn new(weights: Array3<f64>) -> Result<Self> {
        let (n, k, k2) = weights.dim();
        if n == 0 {
            return Err(Error::InvalidArgument("ARF needs at least one orientation".into()));
        }
        if k != k2 || k % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "ARF kernel must be square with odd side, got {k}x{k2}"
            )));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> ArrayView3<'_, f64> {
        self.weights.view()
    }

    pub fn orientations(&self) -> usize {
        self.weights.dim().0
    }

    pub fn kernel_size(&self) -> usize {
        self.weights.dim().1
    }

    /// All `N` rotated instantiations, index `i` rotated by `i·360/N` degrees.
    pub fn instantiations(&self) -> Vec<Array3<f64>> {
        let n = self.orientations();
        (0..n)
            .map(|i| rotation_map(self.kernel_size(), i, n).apply_bank(self.weights.view(), i))
            .collect()
    }
}

/// Sparse linear map from source to destination cells of a `k×k` kernel.
#[derive(Debug, Clone)]
struct RotationMap {
    k: usize,
    /// For each destination cell (row-major), `(source cell, weight)` pairs.
    taps: Vec<Vec<(usize, f64)>>,
}

impl RotationMap {
    fn apply(&self, src: ArrayView2<'_, f64>) -> Array2<f64> {
        let src = src.as_standard_layout();
        let flat = src.as_slice().expect("standard layout");
        let mut out = Array2::zeros((self.k, self.k));
        for (dst, v) in out.iter_mut().enumerate() {
            *v = self.taps[dst].iter().map(|&(s, w)| w * flat[s]).sum();
        }
        out
    }

    /// Spatially rotates every channel and shifts channels by `shift`.
    fn apply_bank(&self, bank: ArrayView3<'_, f64>, shift: usize) -> Array3<f64> {
        let n = bank.dim().0;
        let mut out = Array3::zeros(bank.raw_dim());
        for ch in 0..n {
            let src = (ch + n - shift % n) % n;
            out.index_axis_mut(Axis(0), ch)
                .assign(&self.apply(bank.index_axis(Axis(0), src)));
        }
        out
    }

    /// Adjoint of [`Self::apply_bank`], accumulating into `grad`.
    fn accumulate_adjoint(&self, grad_rotated: ArrayView3<'_, f64>, shift: usize, grad: &mut Array3<f64>) {
        let n = grad_rotated.dim().0;
        for ch in 0..n {
            let src = (ch + n - shift % n) % n;
            let g = grad_rotated.index_axis(Axis(0), ch);
            let g = g.as_standard_layout();
            let gflat = g.as_slice().expect("standard layout");
            let mut target = grad.index_axis_mut(Axis(0), src);
            let tflat = target.as_slice_mut().expect("standard layout");
            for (dst, taps) in self.taps.iter().enumerate() {
                for &(s, w) in taps {
                    tflat[s] += w * gflat[dst];
                }
            }
        }
    }
}

/// Cells of the square ring at Chebyshev radius `r`, clockwise from its top-left corner.
fn ring(k: usize, r: usize) -> Vec<(usize, usize)> {
    let c = k / 2;
    let (lo, hi) = (c - r, c + r);
    let mut cells = Vec::with_capacity(8 * r);
    for col in lo..hi {
        cells.push((lo, col));
    }
    for row in lo..hi {
        cells.push((row, hi));
    }
    for col in (lo + 1..=hi).rev() {
        cells.push((hi, col));
    }
    for row in (lo + 1..=hi).rev() {
        cells.push((row, lo));
    }
    cells
}

fn rotation_map(k: usize, i: usize, n: usize) -> RotationMap {
    let idx = |r: usize, c: usize| r * k + c;
    let mut taps = vec![Vec::new(); k * k];
    if (4 * i).is_multiple_of(n) {
        let quarters = (4 * i / n) % 4;
        for r in 0..k {
            for c in 0..k {
                // One clockwise quarter turn: dst[r][c] = src[k-1-c][r].
                let (mut sr, mut sc) = (r, c);
                for _ in 0..quarters {
                    (sr, sc) = (k - 1 - sc, sr);
                }
                taps[idx(r, c)].push((idx(sr, sc), 1.0));
            }
        }
        return RotationMap { k, taps };
    }
    let center = k / 2;
    taps[idx(center, center)].push((idx(center, center), 1.0));
    let turn = i as f64 / n as f64;
    for r in 1..=center {
        let cells = ring(k, r);
        let len = cells.len();
        let shift = turn * len as f64;
        for (j, &(dr, dc)) in cells.iter().enumerate() {
            let pos = (j as f64 - shift).rem_euclid(len as f64);
            let lo = pos.floor();
            let frac = pos - lo;
            let a = lo as usize % len;
            let b = (a + 1) % len;
            let dst = idx(dr, dc);
            if 1.0 - frac > 0.0 {
                taps[dst].push((idx(cells[a].0, cells[a].1), 1.0 - frac));
            }
            if frac > 0.0 {
                taps[dst].push((idx(cells[b].0, cells[b].1), frac));
            }
        }
    }
    RotationMap { k, taps }
}

/// Rotates a filter bank clockwise by `i·360/N` degrees and cycles its
/// orientation channels by `i`.
pub fn rotate_filter(weights: ArrayView3<'_, f64>, i: usize, n: usize) -> Result<Array3<f64>> {
    if n == 0 || i >= n {
        return Err(Error::InvalidArgument(format!(
            "rotation index {i} out of range for {n} orientations"
        )));
    }
    let (ch, k, k2) = weights.dim();
    if ch != n {
        return Err(Error::ShapeMismatch(format!("filter has {ch} channels, expected {n}")));
    }
    if k != k2 || k % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "filter must be square with odd side, got {k}x{k2}"
        )));
    }
    Ok(rotation_map(k, i, n).apply_bank(weights, i))
}

fn check_input(input: &ArrayView3<'_, f64>, f: &Arf) -> Result<()> {
    if input.dim().0 != f.orientations() {
        return Err(Error::ShapeMismatch(format!(
            "input has {} orientation channels, filter has {}",
            input.dim().0,
            f.orientations()
        )));
    }
    Ok(())
}

/// Same-padded cross-correlation of one channel, accumulated into `out`.
fn correlate_into(input: ArrayView2<'_, f64>, kernel: ArrayView2<'_, f64>, out: &mut Array2<f64>) {
    let (h, w) = input.dim();
    let k = kernel.dim().0;
    let c = (k / 2) as isize;
    for a in 0..k {
        for b in 0..k {
            let wgt = kernel[[a, b]];
            if wgt == 0.0 {
                continue;
            }
            let (dy, dx) = (a as isize - c, b as isize - c);
            let (y0, y1) = ((-dy).max(0) as usize, (h as isize - dy).min(h as isize).max(0) as usize);
            let (x0, x1) = ((-dx).max(0) as usize, (w as isize - dx).min(w as isize).max(0) as usize);
            if y0 >= y1 || x0 >= x1 {
                continue;
            }
            let src = input.slice(s![
                (y0 as isize + dy)..(y1 as isize + dy),
                (x0 as isize + dx)..(x1 as isize + dx)
            ]);
            out.slice_mut(s![y0..y1, x0..x1]).scaled_add(wgt, &src);
        }
    }
}

/// Output channel `i` sums the correlations of every input orientation
/// channel with the matching channel of the `i`-rotated filter.
pub fn arf_convolve(input: ArrayView3<'_, f64>, f: &Arf) -> Result<Array3<f64>> {
    check_input(&input, f)?;
    let (n, h, w) = input.dim();
    let mut out = Array3::zeros((n, h, w));
    for (i, rotated) in f.instantiations().iter().enumerate() {
        let mut acc = Array2::zeros((h, w));
        for ch in 0..n {
            correlate_into(input.index_axis(Axis(0), ch), rotated.index_axis(Axis(0), ch), &mut acc);
        }
        out.index_axis_mut(Axis(0), i).assign(&acc);
    }
    Ok(out)
}

/// Gradients of `Σ grad_out ⊙ arf_convolve(input, f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArfGrads {
    pub input: Array3<f64>,
    pub weights: Array3<f64>,
}

pub fn arf_convolve_backward(input: ArrayView3<'_, f64>, f: &Arf, grad_out: ArrayView3<'_, f64>) -> Result<ArfGrads> {
    check_input(&input, f)?;
    if grad_out.dim() != input.dim() {
        return Err(Error::ShapeMismatch(format!(
            "output gradient {:?} vs input {:?}",
            grad_out.dim(),
            input.dim()
        )));
    }
    let (n, h, w) = input.dim();
    let k = f.kernel_size();
    let c = (k / 2) as isize;
    let mut grad_in = Array3::zeros((n, h, w));
    let mut grad_w = Array3::zeros((n, k, k));
    for (i, rotated) in f.instantiations().iter().enumerate() {
        let g = grad_out.index_axis(Axis(0), i);
        let mut grad_rot = Array3::zeros((n, k, k));
        for ch in 0..n {
            let x = input.index_axis(Axis(0), ch);
            // Input gradient: correlate with the point-reflected kernel.
            let flipped = rotated.index_axis(Axis(0), ch).slice(s![..;-1, ..;-1]).to_owned();
            let mut gi = grad_in.index_axis_mut(Axis(0), ch).to_owned();
            correlate_into(g, flipped.view(), &mut gi);
            grad_in.index_axis_mut(Axis(0), ch).assign(&gi);
            for a in 0..k {
                for b in 0..k {
                    let (dy, dx) = (a as isize - c, b as isize - c);
                    let mut acc = 0.0;
                    for y in 0..h as isize {
                        let sy = y + dy;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for xx in 0..w as isize {
                            let sx = xx + dx;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            acc += g[[y as usize, xx as usize]] * x[[sy as usize, sx as usize]];
                        }
                    }
                    grad_rot[[ch, a, b]] = acc;
                }
            }
        }
        rotation_map(k, i, n).accumulate_adjoint(grad_rot.view(), i, &mut grad_w);
    }
    Ok(ArfGrads {
        input: grad_in,
        weights: grad_w,
    })
}

/// Pixelwise maximum over orientation channels.
pub fn orpool(input: ArrayView3<'_, f64>) -> Array2<f64> {
    input.fold_axis(Axis(0), f64::NEG_INFINITY, |acc, &v| acc.max(v))
}

/// Routes each output gradient to the arg-max channel (lowest index on ties).
pub fn orpool_backward(input: ArrayView3<'_, f64>, grad_out: ArrayView2<'_, f64>) -> Result<Array3<f64>> {
    let (n, h, w) = input.dim();
    if grad_out.dim() != (h, w) {
        return Err(Error::ShapeMismatch(format!(
            "output gradient {:?} vs pooled map {:?}",
            grad_out.dim(),
            (h, w)
        )));
    }
    let mut grad = Array3::zeros((n, h, w));
    for y in 0..h {
        for x in 0..w {
            let mut best = 0;
            for ch in 1..n {
                if input[[ch, y, x]] > input[[best, y, x]] {
                    best = ch;
                }
            }
            if n > 0 {
                grad[[best, y, x]] = grad_out[[y, x]];
            }
        }
    }
    Ok(grad)
}

/// Clockwise quarter turn of every channel of an `N×H×W` map (square maps only).
pub fn rot90_spatial(x: ArrayView3<'_, f64>) -> Array3<f64> {
    // dst[r][c] = src[H-1-c][r]
    x.permuted_axes([0, 2, 1]).slice(s![.., .., ..;-1]).to_owned()
}

/// Cycles orientation channels forward by `shift`: `dst[ch] = src[ch - shift]`.
pub fn shift_channels(x: ArrayView3<'_, f64>, shift: usize) -> Array3<f64> {
    let n = x.dim().0;
    let mut out = Array3::zeros(x.raw_dim());
    for ch in 0..n {
        out.index_axis_mut(Axis(0), ch)
            .assign(&x.index_axis(Axis(0), (ch + n - shift % n) % n));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: (usize, usize, usize), seed: u64) -> Array3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    fn max_abs_diff(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn rotate_identity_and_range() {
        let f = random((8, 3, 3), 1);
        assert_eq!(rotate_filter(f.view(), 0, 8).unwrap(), f);
        assert!(rotate_filter(f.view(), 8, 8).is_err());
        assert!(rotate_filter(f.view(), 1, 4).is_err());
    }

    #[test]
    fn quarter_turn_is_permutation_with_shift() {
        let f = Array::from_shape_fn((4, 3, 3), |(n, r, c)| (n * 9 + r * 3 + c) as f64);
        let g = rotate_filter(f.view(), 1, 4).unwrap();
        // Channel 1 of the result is channel 0 rotated clockwise.
        let ch0 = f.index_axis(Axis(0), 0);
        let expected = [[6.0, 3.0, 0.0], [7.0, 4.0, 1.0], [8.0, 5.0, 2.0]];
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(g[[1, r, c]], expected[r][c]);
                assert_eq!(g[[1, r, c]], ch0[[2 - c, r]]);
            }
        }
    }

    #[test]
    fn ring_shift_agrees_with_permutation_at_quarter_turns() {
        let f = random((1, 5, 5), 4);
        let perm = rotation_map(5, 1, 4).apply(f.index_axis(Axis(0), 0));
        // Same quarter turn through the ring path (2 of 8 steps).
        let mut taps = vec![Vec::new(); 25];
        taps[12].push((12, 1.0));
        for r in 1..=2 {
            let cells = ring(5, r);
            let len = cells.len();
            for (j, &(dr, dc)) in cells.iter().enumerate() {
                let (sr, sc) = cells[(j + len - len / 4) % len];
                taps[dr * 5 + dc].push((sr * 5 + sc, 1.0));
            }
        }
        let ringed = RotationMap { k: 5, taps }.apply(f.index_axis(Axis(0), 0));
        assert_eq!(perm, ringed);
    }

    #[test]
    fn rotations_compose_to_identity() {
        for (n, k) in [(4usize, 3usize), (8, 3), (8, 5), (4, 5)] {
            let f = random((n, k, k), 7);
            let mut g = f.clone();
            for _ in 0..n {
                g = rotate_filter(g.view(), 1, n).unwrap();
            }
            assert!(max_abs_diff(&f, &g) < 1e-9, "n={n} k={k}");
        }
    }

    #[test]
    fn single_orientation_is_plain_correlation() {
        let x = random((1, 6, 6), 2);
        let f = Arf::new(random((1, 3, 3), 3)).unwrap();
        let out = arf_convolve(x.view(), &f).unwrap();
        let w = f.weights();
        for y in 0..6 {
            for xx in 0..6 {
                let mut acc = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        let (sy, sx) = (y as isize + a as isize - 1, xx as isize + b as isize - 1);
                        if (0..6).contains(&sy) && (0..6).contains(&sx) {
                            acc += w[[0, a, b]] * x[[0, sy as usize, sx as usize]];
                        }
                    }
                }
                assert_abs_diff_eq!(out[[0, y, xx]], acc, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_input_zero_output() {
        let f = Arf::new(random((8, 3, 3), 5)).unwrap();
        let out = arf_convolve(Array3::zeros((8, 5, 5)).view(), &f).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
        assert!(arf_convolve(Array3::zeros((4, 5, 5)).view(), &f).is_err());
    }

    #[test]
    fn arf_quarter_turn_equivariance() {
        for seed in 0..5 {
            let x = random((4, 8, 8), 100 + seed);
            let f = Arf::new(random((4, 3, 3), 200 + seed)).unwrap();
            let lhs = arf_convolve(shift_channels(rot90_spatial(x.view()).view(), 1).view(), &f).unwrap();
            let rhs = shift_channels(rot90_spatial(arf_convolve(x.view(), &f).unwrap().view()).view(), 1);
            assert!(max_abs_diff(&lhs, &rhs) <= 1e-12);
        }
    }

    #[test]
    fn orpool_examples() {
        let mut x = Array3::from_elem((4, 2, 2), 0.25);
        assert!(orpool(x.view()).iter().all(|&v| v == 0.25));
        for (ch, v) in [1.0, 5.0, 3.0, 2.0].into_iter().enumerate() {
            x[[ch, 0, 1]] = v;
        }
        let p = orpool(x.view());
        assert_eq!(p[[0, 1]], 5.0);
        assert_eq!(orpool(shift_channels(x.view(), 3).view()), p);
        let dup = ndarray::concatenate(Axis(0), &[x.view(), x.view()]).unwrap();
        assert_eq!(orpool(dup.view()), p);
    }

    #[test]
    fn orpool_gradient_routes_to_first_max() {
        let mut x = Array3::zeros((3, 1, 1));
        x[[1, 0, 0]] = 2.0;
        x[[2, 0, 0]] = 2.0;
        let g = orpool_backward(x.view(), Array2::from_elem((1, 1), 3.0).view()).unwrap();
        assert_eq!(g.iter().copied().collect::<Vec<_>>(), vec![0.0, 3.0, 0.0]);
    }

    #[test]
    fn rot90_matches_index_rule() {
        let x = random((2, 5, 5), 9);
        let r = rot90_spatial(x.view());
        for ch in 0..2 {
            for i in 0..5 {
                for j in 0..5 {
                    assert_eq!(r[[ch, i, j]], x[[ch, 4 - j, i]]);
                }
            }
        }
    }
}
