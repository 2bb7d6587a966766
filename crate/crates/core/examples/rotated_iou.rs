//! Exact rotated IoU against a rasterized estimate for a few box pairs.
//!
//! Run with `cargo run --example rotated_iou`.

use chpdet::geometry::{rotated_iou, rotated_iou_raster, RBox};

fn main() -> chpdet::Result<()> {
    let base = RBox::new(0.0, 0.0, 10.0, 100.0, 0.0)?;
    println!("{:>8} {:>10} {:>10}", "theta", "exact", "raster");
    for theta in [0.0, 1.0, 2.0, 5.0, 10.0, 30.0, 90.0, 180.0] {
        let other = RBox::new(0.0, 0.0, 10.0, 100.0, theta)?;
        println!(
            "{theta:>8.1} {:>10.6} {:>10.6}",
            rotated_iou(&base, &other),
            rotated_iou_raster(&base, &other, 512)?
        );
    }

    // Same box, shifted sideways by half its width.
    let shifted = RBox::new(5.0, 0.0, 10.0, 100.0, 0.0)?;
    println!("half-beam shift: {:.6}", rotated_iou(&base, &shifted));
    Ok(())
}
