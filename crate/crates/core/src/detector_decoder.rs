//! Output maps to oriented detections: center peaks, size and offset lookup,
//! and two-stage head-point estimation.

use log::warn;
use ndarray::{ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::geometry::{ChpBox, Point};
use crate::maps::{Cell, DetectionMaps};

/// Decoded boxes never get a side shorter than this many pixels.
pub const MIN_DECODED_SIZE: f64 = 1e-6;
/// Nudge applied to a head that lands exactly on its center.
pub const DEGENERATE_HEAD_NUDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecodeConfig {
    pub top_k: usize,
    pub head_score_threshold: f64,
    pub score_floor: f64,
    pub stride: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            top_k: 100,
            head_score_threshold: 0.1,
            score_floor: 0.0,
            stride: 4,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::InvalidArgument("top_k must be at least 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        for (name, v) in [
            ("head_score_threshold", self.head_score_threshold),
            ("score_floor", self.score_floor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} {v} outside [0,1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub class_id: usize,
    pub cell: Cell,
    pub score: f64,
}

/// Cells at least as large as every existing 8-neighbor, best first.
///
/// Ties are broken by `(row, col)` ascending.
pub fn extract_peaks(channel: ArrayView2<'_, f64>, class_id: usize, top_k: usize) -> Vec<Peak> {
    let (rows, cols) = channel.dim();
    let mut peaks = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = channel[[r, c]];
            let mut is_peak = true;
            'scan: for nr in r.saturating_sub(1)..=(r + 1).min(rows - 1) {
                for nc in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
                    if (nr, nc) != (r, c) && channel[[nr, nc]] > v {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            if is_peak {
                peaks.push(Peak {
                    class_id,
                    cell: Cell::new(r, c),
                    score: v,
                });
            }
        }
    }
    peaks.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.cell.cmp(&b.cell)));
    peaks.truncate(top_k);
    peaks
}

/// Index of the candidate closest to `regressed` (first on ties).
pub fn assign_head(regressed: Point, candidates: &[Point]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let d = (c.x - regressed.x).powi(2) + (c.y - regressed.y).powi(2);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

pub fn decode_detections(maps: &DetectionMaps, cfg: &DecodeConfig) -> Result<Vec<ChpBox>> {
    cfg.validate()?;
    maps.check_shapes()?;
    let stride = cfg.stride as f64;

    let head_peaks: Vec<Peak> = extract_peaks(maps.head.index_axis(Axis(0), 0), 0, usize::MAX)
        .into_iter()
        .filter(|p| p.score > cfg.head_score_threshold)
        .collect();
    let head_cells: Vec<Point> = head_peaks
        .iter()
        .map(|p| Point::new(p.cell.col as f64 * stride, p.cell.row as f64 * stride))
        .collect();

    let mut out = Vec::new();
    for class_id in 0..maps.num_classes() {
        let peaks = extract_peaks(maps.center.index_axis(Axis(0), class_id), class_id, cfg.top_k);
        for peak in peaks.into_iter().filter(|p| p.score > cfg.score_floor) {
            let (r, c) = (peak.cell.row, peak.cell.col);
            let cx = (c as f64 + maps.center_offset[[0, r, c]]) * stride;
            let cy = (r as f64 + maps.center_offset[[1, r, c]]) * stride;
            let w = (maps.size[[0, r, c]] * stride).max(MIN_DECODED_SIZE);
            let h = (maps.size[[1, r, c]] * stride).max(MIN_DECODED_SIZE);
            let regressed = Point::new(
                cx + maps.head_reg[[0, r, c]] * stride,
                cy + maps.head_reg[[1, r, c]] * stride,
            );
            let (hx, mut hy) = match assign_head(regressed, &head_cells) {
                Some(i) => {
                    let hc = head_peaks[i].cell;
                    (
                        (hc.col as f64 + maps.head_offset[[0, hc.row, hc.col]]) * stride,
                        (hc.row as f64 + maps.head_offset[[1, hc.row, hc.col]]) * stride,
                    )
                }
                None => (regressed.x, regressed.y),
            };
            if hx == cx && hy == cy {
                warn!("class {class_id} detection at ({cx}, {cy}) has a degenerate head; nudged");
                hy += DEGENERATE_HEAD_NUDGE;
            }
            out.push(ChpBox {
                cx,
                cy,
                w,
                h,
                hx,
                hy,
                class_id,
                score: peak.score.clamp(0.0, 1.0),
            });
        }
    }
    Ok(out)
}
