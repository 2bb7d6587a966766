//! Rotated non-maximum suppression.

use std::cmp::Ordering;

use crate::geometry::{rotated_iou, ChpBox, RBox};

/// Score descending, then class, cx, cy ascending.
pub fn detection_order(a: &ChpBox, b: &ChpBox) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.class_id.cmp(&b.class_id))
        .then(a.cx.total_cmp(&b.cx))
        .then(a.cy.total_cmp(&b.cy))
}

/// Greedy suppression; returns indices into `dets` of the survivors, best first.
///
/// A box is dropped when its IoU with an already kept box of the same group
/// exceeds `iou_threshold`. Groups are classes unless `class_agnostic`.
pub fn rotated_nms_indices(dets: &[ChpBox], iou_threshold: f64, class_agnostic: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| detection_order(&dets[i], &dets[j]).then(i.cmp(&j)));
    let rboxes: Vec<Option<RBox>> = dets.iter().map(|d| d.to_rbox().ok()).collect();

    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let suppressed = kept.iter().any(|&k| {
            if !class_agnostic && dets[k].class_id != dets[i].class_id {
                return false;
            }
            match (&rboxes[k], &rboxes[i]) {
                (Some(a), Some(b)) => rotated_iou(a, b) > iou_threshold,
                _ => false,
            }
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept
}

pub fn rotated_nms(dets: &[ChpBox], iou_threshold: f64, class_agnostic: bool) -> Vec<ChpBox> {
    rotated_nms_indices(dets, iou_threshold, class_agnostic)
        .into_iter()
        .map(|i| dets[i])
        .collect()
}
