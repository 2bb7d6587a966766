//! Encodes a synthetic scene into target maps, stores them as tensor files,
//! decodes them again and compares with the ground truth.

use chpdet::dataset_io::{load_maps, save_maps, synth_scene, ClassConfig, SceneSpec};
use chpdet::detector_decoder::{decode_detections, DecodeConfig};
use chpdet::geometry::{angle_diff, rotated_iou};
use chpdet::target_encoder::{encode_targets, EncodingConfig};

fn main() -> chpdet::Result<()> {
    let classes = ClassConfig::default();
    let spec = SceneSpec::new(7);
    let gts = synth_scene(&spec, &classes)?.boxes(&classes)?;

    let cfg = EncodingConfig::new(classes.len(), spec.width, spec.height);
    let targets = encode_targets(&gts, &cfg)?;
    let (rows, cols) = targets.maps.grid();
    println!(
        "{} ships -> {} classes x {rows} x {cols} maps",
        gts.len(),
        targets.maps.num_classes()
    );

    let dir = tempfile::tempdir().map_err(|e| chpdet::Error::io(std::env::temp_dir(), e))?;
    save_maps(dir.path(), &targets.maps)?;
    let dets = decode_detections(&load_maps(dir.path())?, &DecodeConfig::default())?;

    for g in &gts {
        let best = dets
            .iter()
            .filter(|d| d.class_id == g.class_id)
            .max_by(|a, b| {
                let ia = rotated_iou(&g.to_rbox().unwrap(), &a.to_rbox().unwrap());
                let ib = rotated_iou(&g.to_rbox().unwrap(), &b.to_rbox().unwrap());
                ia.total_cmp(&ib)
            })
            .expect("every ship is decoded");
        println!(
            "class {} at ({:6.1}, {:6.1}): IoU {:.4}, heading error {:.2e} deg, score {:.3}",
            g.class_id,
            g.cx,
            g.cy,
            rotated_iou(&g.to_rbox()?, &best.to_rbox()?),
            angle_diff(g.heading()?, best.heading()?),
            best.score
        );
    }
    Ok(())
}
