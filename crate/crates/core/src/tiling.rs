//! Slice geometry for running a fixed-size model over large images without
//! changing the ground sample distance, and merging the per-slice results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ChpBox;
use crate::postprocess::{detection_order, rotated_nms};

pub const DEFAULT_SLICE_SIZE: usize = 1024;
pub const DEFAULT_STRIDE: usize = 820;
pub const DEFAULT_MODEL_SIZE: usize = 512;
pub const DEFAULT_RNMS_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub origin_x: usize,
    pub origin_y: usize,
    pub slice_size: usize,
    pub model_size: usize,
}

impl SliceSpec {
    /// Model pixels per source pixel.
    pub fn scale(&self) -> f64 {
        self.model_size as f64 / self.slice_size as f64
    }

    pub fn to_global(&self, b: &ChpBox) -> ChpBox {
        let s = self.scale();
        let (ox, oy) = (self.origin_x as f64, self.origin_y as f64);
        ChpBox {
            cx: ox + b.cx / s,
            cy: oy + b.cy / s,
            w: b.w / s,
            h: b.h / s,
            hx: ox + b.hx / s,
            hy: oy + b.hy / s,
            ..*b
        }
    }

    pub fn to_model(&self, b: &ChpBox) -> ChpBox {
        let s = self.scale();
        let (ox, oy) = (self.origin_x as f64, self.origin_y as f64);
        ChpBox {
            cx: (b.cx - ox) * s,
            cy: (b.cy - oy) * s,
            w: b.w * s,
            h: b.h * s,
            hx: (b.hx - ox) * s,
            hy: (b.hy - oy) * s,
            ..*b
        }
    }

    /// True when the pixel lies inside this slice's footprint.
    pub fn covers(&self, x: usize, y: usize) -> bool {
        (self.origin_x..self.origin_x + self.slice_size).contains(&x)
            && (self.origin_y..self.origin_y + self.slice_size).contains(&y)
    }
}

fn axis_origins(extent: usize, slice: usize, stride: usize) -> Vec<usize> {
    if extent <= slice {
        return vec![0];
    }
    let mut origins = Vec::new();
    let mut o = 0;
    loop {
        if o + slice >= extent {
            let last = extent - slice;
            if origins.last() != Some(&last) {
                origins.push(last);
            }
            break;
        }
        origins.push(o);
        o += stride;
    }
    origins
}

/// Row-major grid of slices; the last row and column are pulled back so
/// they end on the image edge.
pub fn make_slices(
    image_w: usize,
    image_h: usize,
    slice_size: usize,
    stride: usize,
    model_size: usize,
) -> Result<Vec<SliceSpec>> {
    if image_w == 0 || image_h == 0 || slice_size == 0 || stride == 0 || model_size == 0 {
        return Err(Error::InvalidArgument(
            "image, slice, stride and model sizes must be positive".into(),
        ));
    }
    if model_size > slice_size {
        return Err(Error::InvalidArgument(format!(
            "model size {model_size} exceeds slice size {slice_size}; slices would be upsampled"
        )));
    }
    if stride > slice_size {
        return Err(Error::InvalidArgument(format!(
            "stride {stride} larger than slice {slice_size} leaves gaps"
        )));
    }
    let xs = axis_origins(image_w, slice_size, stride);
    let ys = axis_origins(image_h, slice_size, stride);
    Ok(ys
        .iter()
        .flat_map(|&oy| {
            xs.iter().map(move |&ox| SliceSpec {
                origin_x: ox,
                origin_y: oy,
                slice_size,
                model_size,
            })
        })
        .collect())
}

/// Maps every slice's detections to image coordinates and removes
/// duplicates with rotated NMS.
pub fn merge_detections(
    per_slice: &[(SliceSpec, Vec<ChpBox>)],
    rnms_threshold: f64,
    class_agnostic: bool,
) -> Vec<ChpBox> {
    let mut all: Vec<ChpBox> = per_slice
        .iter()
        .flat_map(|(spec, dets)| dets.iter().map(move |d| spec.to_global(d)))
        .collect();
    all.sort_by(detection_order);
    rotated_nms(&all, rnms_threshold, class_agnostic)
}
