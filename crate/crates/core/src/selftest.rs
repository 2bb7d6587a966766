//! Quick oracle checks runnable from the command line.
//!
//! Each check compares a production routine against a slower, independent
//! computation on seeded random fixtures.

use ndarray::{Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset_io::{synth_scene, ClassConfig, SceneSpec};
use crate::detector_decoder::{decode_detections, DecodeConfig};
use crate::error::Result;
use crate::evaluator::{evaluate, voc07_ap};
use crate::geometry::{rbox_to_chp, rotated_iou, rotated_iou_raster, ChpBox, RBox};
use crate::gradcheck::{central_difference, gradient_error, FD_STEP};
use crate::losses::{variant_focal_loss, LossConfig};
use crate::oim_kernels::{arf_convolve, orpool, rot90_spatial, shift_channels, Arf};
use crate::postprocess::rotated_nms_indices;
use crate::size_prior::size_prior_probability;
use crate::target_encoder::{encode_targets, EncodingConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

pub fn random_rbox<R: Rng>(rng: &mut R, spread: f64) -> RBox {
    RBox::new(
        rng.random_range(-spread..spread),
        rng.random_range(-spread..spread),
        rng.random_range(2.0..30.0),
        rng.random_range(2.0..60.0),
        rng.random_range(0.0..360.0),
    )
    .expect("positive sizes")
}

/// Runs one synthetic scene through encode and decode.
pub fn round_trip_scene(seed: u64, classes: &ClassConfig) -> Result<(Vec<ChpBox>, Vec<ChpBox>)> {
    let spec = SceneSpec::new(seed);
    let scene = synth_scene(&spec, classes)?;
    let gts = scene.boxes(classes)?;
    let targets = encode_targets(&gts, &EncodingConfig::new(classes.len(), spec.width, spec.height))?;
    let dets = decode_detections(&targets.maps, &DecodeConfig::default())?;
    Ok((gts, dets))
}

fn iou_vs_raster(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let a = random_rbox(rng, 15.0);
        let b = random_rbox(rng, 15.0);
        let raster = rotated_iou_raster(&a, &b, 512).expect("grid is large enough");
        worst = worst.max((rotated_iou(&a, &b) - raster).abs());
    }
    Check::new(
        "iou_vs_raster",
        worst <= 0.02,
        format!("max |exact - raster| = {worst:.5}"),
    )
}

fn nms_vs_pairwise(rng: &mut ChaCha8Rng) -> Check {
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(0..=20);
        let dets: Vec<ChpBox> = (0..n)
            .map(|_| {
                rbox_to_chp(
                    &random_rbox(rng, 20.0),
                    rng.random_range(0..2),
                    rng.random_range(0.0..1.0),
                )
            })
            .collect();
        let thr = [0.0, 0.15, 0.5, 1.0][rng.random_range(0..4)];
        // Full IoU matrix, then a scan over the score-sorted list.
        let iou: Vec<Vec<f64>> = dets
            .iter()
            .map(|a| {
                dets.iter()
                    .map(|b| rotated_iou(&a.to_rbox().unwrap(), &b.to_rbox().unwrap()))
                    .collect()
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| crate::postprocess::detection_order(&dets[i], &dets[j]).then(i.cmp(&j)));
        let mut alive = vec![true; n];
        for (pos, &i) in order.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            for &j in &order[pos + 1..] {
                if dets[i].class_id == dets[j].class_id && iou[i][j] > thr {
                    alive[j] = false;
                }
            }
        }
        let expected: Vec<usize> = order.iter().copied().filter(|&i| alive[i]).collect();
        if rotated_nms_indices(&dets, thr, false) != expected {
            mismatches += 1;
        }
    }
    Check::new(
        "nms_vs_pairwise",
        mismatches == 0,
        format!("{mismatches} of 100 sets differ"),
    )
}

fn voc07_hand_case() -> Check {
    let ap = voc07_ap(&[true, false, true], 2).unwrap_or(f64::NAN);
    Check::new("voc07_hand_case", (ap - 0.8485).abs() <= 1e-4, format!("AP = {ap:.6}"))
}

fn focal_gradient(rng: &mut ChaCha8Rng) -> Check {
    let cfg = LossConfig::default();
    let pred = Array3::from_shape_fn((2, 8, 8), |_| rng.random_range(0.05..0.95));
    let mut target = Array3::from_shape_fn((2, 8, 8), |_| rng.random_range(0.0..0.9));
    target[[0, 2, 3]] = 1.0;
    target[[1, 5, 6]] = 1.0;
    let analytic = variant_focal_loss(pred.view(), target.view(), 2, &cfg)
        .unwrap()
        .gradient;
    let numeric = central_difference(&pred, FD_STEP, |p| {
        variant_focal_loss(p.view(), target.view(), 2, &cfg).unwrap().value
    });
    let err = gradient_error(&analytic, &numeric);
    Check::new("focal_gradient", err < 1e-4, format!("max relative error = {err:.2e}"))
}

fn arf_equivariance(rng: &mut ChaCha8Rng) -> Check {
    let arf = Arf::new(Array3::from_shape_fn((4, 3, 3), |_| rng.random_range(-1.0..1.0))).unwrap();
    let x = Array3::from_shape_fn((4, 8, 8), |_| rng.random_range(-1.0..1.0));
    let rotated_in = shift_channels(rot90_spatial(x.view()).view(), 1);
    let lhs = arf_convolve(rotated_in.view(), &arf).unwrap();
    let out = arf_convolve(x.view(), &arf).unwrap();
    let rhs = shift_channels(rot90_spatial(out.view()).view(), 1);
    let conv_err = (&lhs - &rhs).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pooled = orpool(lhs.view());
    let pooled_rot = rot90_spatial(orpool(out.view()).insert_axis(Axis(0)).view());
    let pool_err = (&pooled - &pooled_rot.index_axis(Axis(0), 0))
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let err = conv_err.max(pool_err);
    Check::new("arf_equivariance", err <= 1e-12, format!("max deviation = {err:.2e}"))
}

fn size_prior_trapezoid() -> Check {
    let mut worst = 0.0f64;
    for k in [0.0, 1.0, 3.0] {
        // 1 - 2∫₀ᵏ φ(t) dt
        let steps = 20_000;
        let h = k / steps as f64;
        let phi = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let integral: f64 = (0..steps)
            .map(|i| h * (phi(i as f64 * h) + phi((i + 1) as f64 * h)) / 2.0)
            .sum();
        let oracle = 1.0 - 2.0 * integral;
        let p = size_prior_probability(172.8 + k * 0.2 * 172.8, 172.8, 0.2);
        worst = worst.max((p - oracle).abs());
    }
    Check::new(
        "size_prior_trapezoid",
        worst <= 1e-3,
        format!("max deviation = {worst:.2e}"),
    )
}

fn encode_decode_round_trip(seed: u64) -> Check {
    let classes = ClassConfig::default();
    let mut dets = Vec::new();
    let mut gts = Vec::new();
    for s in 0..10 {
        match round_trip_scene(seed.wrapping_add(s), &classes) {
            Ok((g, d)) => {
                gts.push(g);
                dets.push(d);
            }
            Err(e) => return Check::new("encode_decode_round_trip", false, e.to_string()),
        }
    }
    let report = evaluate(&dets, &gts, &[0.5], 0.5);
    let ok = report.map_at[0] == 1.0 && report.bda >= 0.99;
    Check::new(
        "encode_decode_round_trip",
        ok,
        format!(
            "mAP@0.5 = {:.4}, BDA = {:.4} over 10 scenes",
            report.map_at[0], report.bda
        ),
    )
}

pub fn run_all(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        iou_vs_raster(&mut rng),
        nms_vs_pairwise(&mut rng),
        voc07_hand_case(),
        focal_gradient(&mut rng),
        arf_equivariance(&mut rng),
        size_prior_trapezoid(),
        encode_decode_round_trip(seed),
    ]
}
