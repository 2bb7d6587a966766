//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use chpdet::geometry::{rbox_to_chp, rbox_to_quad, ChpBox, Point, RBox};
use rand::Rng;

pub fn random_rbox<R: Rng>(rng: &mut R, spread: f64) -> RBox {
    RBox::new(
        rng.random_range(-spread..spread),
        rng.random_range(-spread..spread),
        rng.random_range(2.0..30.0),
        rng.random_range(2.0..60.0),
        rng.random_range(0.0..360.0),
    )
    .unwrap()
}

pub fn random_det<R: Rng>(rng: &mut R, spread: f64, classes: usize) -> ChpBox {
    let r = random_rbox(rng, spread);
    rbox_to_chp(&r, rng.random_range(0..classes), rng.random_range(0.0..1.0))
}

/// Point-in-rectangle test in the box frame, no polygon code involved.
pub fn inside(r: &RBox, x: f64, y: f64) -> bool {
    let (s, c) = r.theta.to_radians().sin_cos();
    let (dx, dy) = (x - r.cx, y - r.cy);
    // forward = (s, -c), right = (c, s)
    let along = dx * s - dy * c;
    let across = dx * c + dy * s;
    along.abs() <= r.h / 2.0 && across.abs() <= r.w / 2.0
}

/// IoU by sampling an `n × n` grid of cell centers over the joint bounding box.
pub fn grid_iou(a: &RBox, b: &RBox, n: usize) -> f64 {
    let corners: Vec<Point> = rbox_to_quad(a).0.into_iter().chain(rbox_to_quad(b).0).collect();
    let x0 = corners.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let x1 = corners.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let y0 = corners.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let y1 = corners.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let (dx, dy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
    let (mut inter, mut uni) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (x0 + (j as f64 + 0.5) * dx, y0 + (i as f64 + 0.5) * dy);
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += usize::from(ia && ib);
            uni += usize::from(ia || ib);
        }
    }
    if uni == 0 {
        0.0
    } else {
        inter as f64 / uni as f64
    }
}

/// Score descending, then class, cx, cy, then input position.
pub fn ranked(dets: &[ChpBox]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .score
            .total_cmp(&dets[i].score)
            .then(dets[i].class_id.cmp(&dets[j].class_id))
            .then(dets[i].cx.total_cmp(&dets[j].cx))
            .then(dets[i].cy.total_cmp(&dets[j].cy))
            .then(i.cmp(&j))
    });
    order
}

/// Builds the full pairwise IoU matrix first, then suppresses.
pub fn nms_oracle(dets: &[ChpBox], thr: f64, class_agnostic: bool) -> Vec<usize> {
    let n = dets.len();
    let iou: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| chpdet::rotated_iou(&dets[i].to_rbox().unwrap(), &dets[j].to_rbox().unwrap()))
                .collect()
        })
        .collect();
    let order = ranked(dets);
    let mut suppressed = vec![false; n];
    let mut kept = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        kept.push(i);
        for &j in &order[pos + 1..] {
            if (class_agnostic || dets[i].class_id == dets[j].class_id) && iou[i][j] > thr {
                suppressed[j] = true;
            }
        }
    }
    kept
}

/// Labels every detection of every image, visiting all ground truths for each.
/// Returns `(image, det index, is_tp)` in global rank order.
pub fn match_oracle(dets: &[Vec<ChpBox>], gts: &[Vec<ChpBox>], thr: f64) -> Vec<(usize, usize, bool)> {
    let mut all: Vec<(usize, usize)> = Vec::new();
    for (img, ds) in dets.iter().enumerate() {
        for j in 0..ds.len() {
            all.push((img, j));
        }
    }
    all.sort_by(|&(ia, ja), &(ib, jb)| {
        let (a, b) = (&dets[ia][ja], &dets[ib][jb]);
        b.score
            .total_cmp(&a.score)
            .then(ia.cmp(&ib))
            .then(a.class_id.cmp(&b.class_id))
            .then(a.cx.total_cmp(&b.cx))
            .then(a.cy.total_cmp(&b.cy))
            .then(ja.cmp(&jb))
    });
    let mut taken: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
    let mut out = Vec::new();
    for (img, j) in all {
        let d = &dets[img][j];
        let dr = d.to_rbox().unwrap().reduced();
        let candidates: Vec<(usize, f64)> = gts[img]
            .iter()
            .enumerate()
            .filter(|(g, gt)| gt.class_id == d.class_id && !taken[img][*g])
            .map(|(g, gt)| (g, chpdet::rotated_iou(&dr, &gt.to_rbox().unwrap().reduced())))
            .collect();
        // First maximum wins, matching a left-to-right scan.
        let best = candidates.iter().fold(None::<(usize, f64)>, |acc, &(g, v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((g, v)),
        });
        let tp = match best {
            Some((g, v)) if v > thr => {
                taken[img][g] = true;
                true
            }
            _ => false,
        };
        out.push((img, j, tp));
    }
    out
}

/// 11-point AP by enumerating every prefix of the ranked list.
pub fn ap_oracle(labels: &[bool], n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    let mut sum = 0.0;
    for t in 0..=10 {
        let r = t as f64 / 10.0;
        let mut best = 0.0f64;
        for k in 1..=labels.len() {
            let tp = labels[..k].iter().filter(|&&x| x).count();
            let recall = tp as f64 / n_gt as f64;
            let precision = tp as f64 / k as f64;
            if recall >= r {
                best = best.max(precision);
            }
        }
        sum += best;
    }
    Some(sum / 11.0)
}
