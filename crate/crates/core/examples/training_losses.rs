//! Loss terms for a noisy prediction, and a finite-difference check of the
//! focal loss gradient.

use chpdet::gradcheck::{central_difference, gradient_error, FD_STEP};
use chpdet::losses::{loss_parts, total_loss, variant_focal_loss, LossConfig};
use chpdet::target_encoder::{encode_targets, EncodingConfig};
use chpdet::ChpBox;
use rand::{Rng, SeedableRng};

fn main() -> chpdet::Result<()> {
    let ships = [
        ChpBox::new(40.0, 40.0, 8.0, 40.0, 40.0, 20.0, 0),
        ChpBox::new(90.0, 70.0, 6.0, 30.0, 105.0, 70.0, 1),
    ];
    let targets = encode_targets(&ships, &EncodingConfig::new(2, 128, 128))?;
    let cfg = LossConfig::default();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut pred = targets.maps.clone();
    for map in [&mut pred.center, &mut pred.head] {
        map.mapv_inplace(|v| (v * 0.8 + rng.random_range(0.0..0.1)).clamp(0.01, 0.99));
    }
    for map in [
        &mut pred.center_offset,
        &mut pred.size,
        &mut pred.head_reg,
        &mut pred.head_offset,
    ] {
        map.mapv_inplace(|v| v + rng.random_range(-0.2..0.2));
    }

    let parts = loss_parts(&pred, &targets, &cfg)?;
    for (term, value) in &parts {
        println!("{:<12} {value:.5}", term.name());
    }
    println!("{:<12} {:.5}", "total", total_loss(&parts, &cfg)?);

    let n = targets.num_objects();
    let analytic = variant_focal_loss(pred.center.view(), targets.maps.center.view(), n, &cfg)?.gradient;
    let numeric = central_difference(&pred.center, FD_STEP, |p| {
        variant_focal_loss(p.view(), targets.maps.center.view(), n, &cfg)
            .unwrap()
            .value
    });
    println!(
        "focal gradient relative error: {:.2e}",
        gradient_error(&analytic, &numeric)
    );
    Ok(())
}
