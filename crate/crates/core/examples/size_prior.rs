//! Rescoring detections with the ship-length prior.

use chpdet::dataset_io::ClassConfig;
use chpdet::size_prior::{refine_scores, size_prior_probability};
use chpdet::ChpBox;

fn main() -> chpdet::Result<()> {
    let classes = ClassConfig::default();
    let table = classes.length_table()?;
    let mean = classes.classes[0].mean_length;
    println!(
        "{} mean length {mean} m, lambda {}",
        classes.classes[0].name, table.lambda
    );

    for k in [0.0, 0.5, 1.0, 2.0, 3.0] {
        let len = mean + k * table.lambda * mean;
        println!(
            "  length {len:6.1} m -> p = {:.5}",
            size_prior_probability(len, mean, table.lambda)
        );
    }

    let dets: Vec<ChpBox> = [120.0, 172.8, 200.0, 300.0]
        .iter()
        .map(|&h| ChpBox::new(100.0, 100.0, h / 6.0, h, 100.0, 100.0 - h / 2.0, 0).with_score(0.9))
        .collect();
    for (before, after) in dets.iter().zip(refine_scores(&dets, &table)?) {
        println!(
            "  {:5.1} px ship: score {:.3} -> {:.3}",
            before.h, before.score, after.score
        );
    }
    Ok(())
}
