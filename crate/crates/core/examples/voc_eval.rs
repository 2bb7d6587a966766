//! VOC07 evaluation of perturbed detections, including reversed headings
//! that still count for mAP but not for bow-direction accuracy.

use chpdet::dataset_io::{synth_scene, ClassConfig, SceneSpec};
use chpdet::evaluator::{evaluate, DEFAULT_THRESHOLDS};
use chpdet::ChpBox;
use rand::{Rng, SeedableRng};

fn main() -> chpdet::Result<()> {
    let classes = ClassConfig::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut all_dets = Vec::new();
    let mut all_gts = Vec::new();
    for seed in 0..20 {
        let gts = synth_scene(&SceneSpec::new(seed), &classes)?.boxes(&classes)?;
        let mut dets = Vec::new();
        for g in &gts {
            if rng.random_bool(0.1) {
                continue;
            }
            let (dx, dy) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let mut d = ChpBox {
                cx: g.cx + dx,
                cy: g.cy + dy,
                hx: g.hx + dx,
                hy: g.hy + dy,
                w: g.w * rng.random_range(0.9..1.1),
                score: rng.random_range(0.3..1.0),
                ..*g
            };
            if rng.random_bool(0.05) {
                d.hx = 2.0 * d.cx - d.hx;
                d.hy = 2.0 * d.cy - d.hy;
            }
            dets.push(d);
        }
        for _ in 0..2 {
            let cx = rng.random_range(50.0..450.0);
            let cy = rng.random_range(50.0..450.0);
            dets.push(ChpBox::new(cx, cy, 8.0, 40.0, cx, cy - 20.0, 1).with_score(rng.random_range(0.0..0.6)));
        }
        all_gts.push(gts);
        all_dets.push(dets);
    }

    let report = evaluate(&all_dets, &all_gts, &DEFAULT_THRESHOLDS, 0.5);
    for (id, c) in classes.classes.iter().enumerate() {
        println!("class {id}: {}", c.name);
    }
    print!("{report}");
    Ok(())
}
