mod common;

use approx::assert_abs_diff_eq;
use chpdet::geometry::{chp_to_rbox, rbox_to_chp, rotated_iou, ChpBox, RBox};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn rotated_copy_exact_value() {
    // Frozen from an independent polygon library evaluation.
    let a = RBox::new(0.0, 0.0, 10.0, 100.0, 0.0).unwrap();
    let b = RBox::new(0.0, 0.0, 10.0, 100.0, 5.0).unwrap();
    assert_abs_diff_eq!(rotated_iou(&a, &b), 0.642_696_775_393_156_1, epsilon = 1e-12);
    assert_abs_diff_eq!(common::grid_iou(&a, &b, 1500), 0.6427, epsilon = 2e-3);
}

#[test]
fn exact_matches_point_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let a = common::random_rbox(&mut rng, 8.0);
        let b = common::random_rbox(&mut rng, 8.0);
        let exact = rotated_iou(&a, &b);
        let sampled = common::grid_iou(&a, &b, 400);
        assert!((exact - sampled).abs() < 0.02, "{a:?} {b:?}: {exact} vs {sampled}");
    }
}

#[test]
fn heading_conventions() {
    let up = ChpBox::new(10.0, 10.0, 4.0, 20.0, 10.0, 0.0, 0);
    assert_abs_diff_eq!(chp_to_rbox(&up).unwrap().theta, 0.0);
    let right = ChpBox::new(10.0, 10.0, 4.0, 20.0, 20.0, 10.0, 0);
    assert_abs_diff_eq!(chp_to_rbox(&right).unwrap().theta, 90.0, epsilon = 1e-12);
    let down = ChpBox::new(10.0, 10.0, 4.0, 20.0, 10.0, 30.0, 0);
    assert_abs_diff_eq!(chp_to_rbox(&down).unwrap().theta, 180.0, epsilon = 1e-12);
    let left = ChpBox::new(10.0, 10.0, 4.0, 20.0, 0.0, 10.0, 0);
    assert_abs_diff_eq!(chp_to_rbox(&left).unwrap().theta, 270.0, epsilon = 1e-12);
    let degenerate = ChpBox::new(10.0, 10.0, 4.0, 20.0, 10.0, 10.0, 0);
    assert!(chp_to_rbox(&degenerate)
        .unwrap_err()
        .to_string()
        .contains("zero-length heading"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn iou_bounded_and_self_one(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_rbox(&mut rng, 20.0);
        let b = common::random_rbox(&mut rng, 20.0);
        let v = rotated_iou(&a, &b);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        prop_assert!((rotated_iou(&a, &a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn chp_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = common::random_rbox(&mut rng, 500.0);
        let back = chp_to_rbox(&rbox_to_chp(&r, 0, 1.0)).unwrap();
        prop_assert!((back.cx - r.cx).abs() < 1e-9 && (back.cy - r.cy).abs() < 1e-9);
        prop_assert!(chpdet::angle_diff(back.theta, r.theta) < 1e-9);
        prop_assert!((back.h - r.h).abs() < 1e-9 && (back.w - r.w).abs() < 1e-12);
    }
}
