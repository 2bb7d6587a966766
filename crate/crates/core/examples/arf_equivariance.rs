//! Active rotating filters: rotating the input a quarter turn rotates the
//! response and cycles its orientation channels; ORPooling removes the cycle.

use chpdet::oim_kernels::{arf_convolve, orpool, rot90_spatial, shift_channels, Arf};
use ndarray::{Array3, Axis};
use rand::{Rng, SeedableRng};

fn max_abs(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    (a - b).iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

fn main() -> chpdet::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let arf = Arf::new(Array3::from_shape_fn((4, 3, 3), |_| rng.random_range(-1.0..1.0)))?;
    let x = Array3::from_shape_fn((4, 8, 8), |_| rng.random_range(-1.0..1.0));

    let response = arf_convolve(x.view(), &arf)?;
    let turned_input = shift_channels(rot90_spatial(x.view()).view(), 1);
    let turned_response = arf_convolve(turned_input.view(), &arf)?;
    let expected = shift_channels(rot90_spatial(response.view()).view(), 1);
    println!(
        "conv equivariance deviation: {:.2e}",
        max_abs(&turned_response, &expected)
    );

    let pooled = orpool(turned_response.view()).insert_axis(Axis(0));
    let pooled_then_turned = rot90_spatial(orpool(response.view()).insert_axis(Axis(0)).view());
    println!(
        "pooled invariance deviation: {:.2e}",
        max_abs(&pooled, &pooled_then_turned)
    );

    let eight = Arf::new(Array3::from_shape_fn((8, 3, 3), |_| rng.random_range(-1.0..1.0)))?;
    println!(
        "N=8 bank: {} instantiations of a {}x{} filter",
        eight.instantiations().len(),
        eight.kernel_size(),
        eight.kernel_size()
    );
    Ok(())
}
