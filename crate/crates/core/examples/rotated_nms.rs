//! Rotated NMS on a cluster of near-duplicate detections.

use chpdet::geometry::{rbox_to_chp, RBox};
use chpdet::postprocess::rotated_nms;

fn main() -> chpdet::Result<()> {
    let boxes = [
        (0.0, 0.0, 0.0, 0.95, 0),
        (1.0, 2.0, 3.0, 0.80, 0),
        (0.0, 0.0, 5.0, 0.70, 0),
        (0.0, 0.0, 90.0, 0.60, 0),
        (0.0, 0.0, 0.0, 0.85, 1),
        (60.0, 0.0, 0.0, 0.50, 0),
    ];
    let dets: Vec<_> = boxes
        .iter()
        .map(|&(cx, cy, theta, score, class)| Ok(rbox_to_chp(&RBox::new(cx, cy, 10.0, 100.0, theta)?, class, score)))
        .collect::<chpdet::Result<_>>()?;

    for (label, agnostic) in [("per class", false), ("class agnostic", true)] {
        let kept = rotated_nms(&dets, 0.15, agnostic);
        println!("{label}: kept {} of {}", kept.len(), dets.len());
        for d in kept {
            println!(
                "  class {} score {:.2} at ({:.0}, {:.0}) heading {:.0}",
                d.class_id,
                d.score,
                d.cx,
                d.cy,
                d.heading()?
            );
        }
    }
    Ok(())
}
