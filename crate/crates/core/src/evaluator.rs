//! VOC07 11-point AP at several IoU thresholds, plus bow-direction accuracy.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{angle_diff, rotated_iou, ChpBox, RBox};

pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.5, 0.6, 0.7, 0.8];
/// A true positive counts toward bow-direction accuracy when its heading is
/// closer than this to the ground truth.
pub const BDA_MAX_ANGLE: f64 = 10.0;

/// Outcome for one detection, in global processing order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledDetection {
    pub image: usize,
    pub det_index: usize,
    pub class_id: usize,
    pub score: f64,
    /// Index of the matched ground truth within its image, if a true positive.
    pub matched_gt: Option<usize>,
}

impl LabeledDetection {
    pub fn is_tp(&self) -> bool {
        self.matched_gt.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub labels: Vec<LabeledDetection>,
    /// Per image, per ground truth: was it matched.
    pub gt_matched: Vec<Vec<bool>>,
}

fn global_order(a: (usize, &ChpBox), b: (usize, &ChpBox)) -> Ordering {
    b.1.score
        .total_cmp(&a.1.score)
        .then(a.0.cmp(&b.0))
        .then(a.1.class_id.cmp(&b.1.class_id))
        .then(a.1.cx.total_cmp(&b.1.cx))
        .then(a.1.cy.total_cmp(&b.1.cy))
}

fn reduced(b: &ChpBox) -> Option<RBox> {
    b.to_rbox().ok().map(|r| r.reduced())
}

/// Greedy matching in global score order. A detection becomes a true
/// positive when its best-IoU unmatched same-class ground truth in the same
/// image has IoU strictly above `iou_threshold`.
pub fn match_detections(dets: &[Vec<ChpBox>], gts: &[Vec<ChpBox>], iou_threshold: f64) -> MatchResult {
    let mut order: Vec<(usize, usize)> = dets
        .iter()
        .enumerate()
        .flat_map(|(img, ds)| (0..ds.len()).map(move |j| (img, j)))
        .collect();
    order.sort_by(|&(ia, ja), &(ib, jb)| global_order((ia, &dets[ia][ja]), (ib, &dets[ib][jb])).then(ja.cmp(&jb)));

    let gt_boxes: Vec<Vec<Option<RBox>>> = gts.iter().map(|g| g.iter().map(reduced).collect()).collect();
    let mut gt_matched: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
    let mut labels = Vec::with_capacity(order.len());

    for (img, j) in order {
        let det = &dets[img][j];
        let mut best: Option<(usize, f64)> = None;
        if let (Some(d), Some(image_gts)) = (reduced(det), gts.get(img)) {
            for (g, gt) in image_gts.iter().enumerate() {
                if gt.class_id != det.class_id || gt_matched[img][g] {
                    continue;
                }
                let Some(gb) = &gt_boxes[img][g] else { continue };
                let iou = rotated_iou(&d, gb);
                if best.is_none_or(|(_, b)| iou > b) {
                    best = Some((g, iou));
                }
            }
        }
        let matched_gt = match best {
            Some((g, iou)) if iou > iou_threshold => {
                gt_matched[img][g] = true;
                Some(g)
            }
            _ => None,
        };
        labels.push(LabeledDetection {
            image: img,
            det_index: j,
            class_id: det.class_id,
            score: det.score,
            matched_gt,
        });
    }
    MatchResult { labels, gt_matched }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub score: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Cumulative precision/recall after each detection of a ranked list.
pub fn precision_recall(ranked: &[(f64, bool)], n_gt: usize) -> Vec<PrPoint> {
    let mut tp = 0usize;
    ranked
        .iter()
        .enumerate()
        .map(|(i, &(score, is_tp))| {
            tp += usize::from(is_tp);
            PrPoint {
                score,
                recall: if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 },
                precision: tp as f64 / (i + 1) as f64,
            }
        })
        .collect()
}

/// 11-point interpolated AP of TP/FP labels in rank order. `None` when there
/// is no ground truth for the class.
pub fn voc07_ap(ranked_tp: &[bool], n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    let ranked: Vec<(f64, bool)> = ranked_tp.iter().map(|&t| (0.0, t)).collect();
    let pr = precision_recall(&ranked, n_gt);
    let mut sum = 0.0;
    for t in 0..=10 {
        let r = t as f64 / 10.0;
        let p = pr
            .iter()
            .filter(|pt| pt.recall >= r)
            .map(|pt| pt.precision)
            .fold(0.0, f64::max);
        sum += p;
    }
    Some(sum / 11.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEval {
    pub n_gt: usize,
    /// One entry per threshold.
    pub ap: Vec<Option<f64>>,
    pub tp: Vec<usize>,
    pub fp: Vec<usize>,
    pub fn_: Vec<usize>,
    pub pr: Vec<Vec<PrPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    pub per_class: BTreeMap<usize, ClassEval>,
    /// Unweighted mean AP over classes with ground truth, per threshold.
    pub map_at: Vec<f64>,
    pub bda_iou: f64,
    /// Fraction of true positives at `bda_iou` with heading error below 10°.
    pub bda: f64,
    pub bda_tp: usize,
    pub bda_correct: usize,
}

impl EvalReport {
    pub fn map_at_threshold(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&t| (t - threshold).abs() < 1e-12)
            .map(|i| self.map_at[i])
    }
}

pub fn evaluate(dets: &[Vec<ChpBox>], gts: &[Vec<ChpBox>], thresholds: &[f64], bda_iou: f64) -> EvalReport {
    let classes: BTreeSet<usize> = dets
        .iter()
        .chain(gts.iter())
        .flat_map(|v| v.iter().map(|b| b.class_id))
        .collect();
    let n_gt_of = |c: usize| gts.iter().flatten().filter(|g| g.class_id == c).count();

    let mut per_class: BTreeMap<usize, ClassEval> = classes
        .iter()
        .map(|&c| {
            (
                c,
                ClassEval {
                    n_gt: n_gt_of(c),
                    ap: Vec::new(),
                    tp: Vec::new(),
                    fp: Vec::new(),
                    fn_: Vec::new(),
                    pr: Vec::new(),
                },
            )
        })
        .collect();

    let mut map_at = Vec::with_capacity(thresholds.len());
    for &thr in thresholds {
        let m = match_detections(dets, gts, thr);
        let mut aps = Vec::new();
        for (&c, ce) in per_class.iter_mut() {
            let ranked: Vec<(f64, bool)> = m
                .labels
                .iter()
                .filter(|l| l.class_id == c)
                .map(|l| (l.score, l.is_tp()))
                .collect();
            let tp = ranked.iter().filter(|r| r.1).count();
            let tps: Vec<bool> = ranked.iter().map(|r| r.1).collect();
            let ap = voc07_ap(&tps, ce.n_gt);
            if let Some(a) = ap {
                aps.push(a);
            }
            ce.ap.push(ap);
            ce.tp.push(tp);
            ce.fp.push(ranked.len() - tp);
            ce.fn_.push(ce.n_gt - tp);
            ce.pr.push(precision_recall(&ranked, ce.n_gt));
        }
        map_at.push(if aps.is_empty() {
            0.0
        } else {
            aps.iter().sum::<f64>() / aps.len() as f64
        });
    }

    let m = match_detections(dets, gts, bda_iou);
    let mut bda_tp = 0;
    let mut bda_correct = 0;
    for l in &m.labels {
        let Some(g) = l.matched_gt else { continue };
        bda_tp += 1;
        let det = &dets[l.image][l.det_index];
        let gt = &gts[l.image][g];
        if let (Ok(a), Ok(b)) = (det.heading(), gt.heading()) {
            if angle_diff(a, b) < BDA_MAX_ANGLE {
                bda_correct += 1;
            }
        }
    }
    let bda = if bda_tp == 0 {
        0.0
    } else {
        bda_correct as f64 / bda_tp as f64
    };

    EvalReport {
        thresholds: thresholds.to_vec(),
        per_class,
        map_at,
        bda_iou,
        bda,
        bda_tp,
        bda_correct,
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<8}{:>6}", "class", "n_gt")?;
        for t in &self.thresholds {
            write!(f, "{:>10}", format!("AP@{t:.2}"))?;
        }
        writeln!(f)?;
        for (c, ce) in &self.per_class {
            write!(f, "{c:<8}{:>6}", ce.n_gt)?;
            for ap in &ce.ap {
                match ap {
                    Some(a) => write!(f, "{:>10.4}", a)?,
                    None => write!(f, "{:>10}", "-")?,
                }
            }
            writeln!(f)?;
        }
        write!(f, "{:<14}", "mAP")?;
        for m in &self.map_at {
            write!(f, "{m:>10.4}")?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "BDA@{:.2}: {:.4} ({}/{} true positives within {BDA_MAX_ANGLE}°)",
            self.bda_iou, self.bda, self.bda_correct, self.bda_tp
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rbox_to_chp;
    use approx::assert_abs_diff_eq;

    fn boat(cx: f64, theta: f64, score: f64) -> ChpBox {
        rbox_to_chp(&RBox::new(cx, 50.0, 10.0, 60.0, theta).unwrap(), 0, score)
    }

    #[test]
    fn single_match_rules() {
        let gt = vec![vec![boat(50.0, 0.0, 1.0)]];
        let m = match_detections(&[vec![boat(50.5, 0.0, 0.9)]], &gt, 0.5);
        assert!(m.labels[0].is_tp());

        let m = match_detections(&[vec![boat(50.5, 0.0, 0.8), boat(50.0, 1.0, 0.9)]], &gt, 0.5);
        assert_eq!(m.labels[0].det_index, 1);
        assert!(m.labels[0].is_tp());
        assert!(!m.labels[1].is_tp());

        // 6 px sideways across a 10 px beam: IoU 0.25.
        let m = match_detections(&[vec![boat(56.0, 0.0, 0.9)]], &gt, 0.5);
        assert!(!m.labels[0].is_tp());
        assert_eq!(m.gt_matched, vec![vec![false]]);
    }

    #[test]
    fn ap_examples() {
        assert_eq!(voc07_ap(&[true], 1), Some(1.0));
        let ap = voc07_ap(&[true, false, true], 2).unwrap();
        assert_abs_diff_eq!(ap, (6.0 + 5.0 * 2.0 / 3.0) / 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ap, 0.8485, epsilon = 1e-4);
        assert_eq!(voc07_ap(&[false, false], 3), Some(0.0));
        assert_eq!(voc07_ap(&[], 0), None);
        assert_eq!(voc07_ap(&[false], 0), None);
    }

    #[test]
    fn perfect_detections() {
        let gts = vec![
            vec![boat(50.0, 10.0, 1.0), boat(150.0, 200.0, 1.0)],
            vec![boat(30.0, 90.0, 1.0)],
        ];
        let r = evaluate(&gts, &gts, &DEFAULT_THRESHOLDS, 0.5);
        assert!(r.map_at.iter().all(|&m| m == 1.0));
        assert_eq!(r.bda, 1.0);
        assert_eq!(r.per_class[&0].fn_, vec![0; 4]);
    }

    #[test]
    fn reversed_heading_counts_for_map_not_bda() {
        let gts = vec![vec![boat(50.0, 30.0, 1.0)]];
        let dets = vec![vec![boat(50.0, 210.0, 0.9)]];
        let r = evaluate(&dets, &gts, &[0.5], 0.5);
        assert_eq!(r.map_at, vec![1.0]);
        assert_eq!(r.bda_tp, 1);
        assert_eq!(r.bda, 0.0);
    }

    #[test]
    fn detection_only_classes_excluded_from_map() {
        let gts = vec![vec![boat(50.0, 0.0, 1.0)]];
        let mut stray = boat(200.0, 0.0, 0.95);
        stray.class_id = 3;
        let dets = vec![vec![boat(50.0, 0.0, 0.9), stray]];
        let r = evaluate(&dets, &gts, &[0.5], 0.5);
        assert_eq!(r.map_at, vec![1.0]);
        assert_eq!(r.per_class[&3].ap, vec![None]);
        assert_eq!(r.per_class[&3].fp, vec![1]);
        assert!(r.to_string().contains("mAP"));
    }
}
