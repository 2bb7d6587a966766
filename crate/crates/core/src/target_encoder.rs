//! Ground-truth boxes to training target maps via rotated Gaussian kernels.

use log::warn;
use ndarray::ArrayViewMut2;

use crate::error::{Error, Result};
use crate::geometry::{chp_to_rbox, ChpBox};
use crate::maps::{Cell, DetectionMaps};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EncodingConfig {
    pub stride: usize,
    pub alpha: f64,
    pub num_classes: usize,
    pub gaussian_min_overlap: f64,
    pub input_w: usize,
    pub input_h: usize,
}

impl EncodingConfig {
    pub fn new(num_classes: usize, input_w: usize, input_h: usize) -> Self {
        Self {
            stride: 4,
            alpha: 1.2,
            num_classes,
            gaussian_min_overlap: 0.7,
            input_w,
            input_h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        if self.input_w == 0
            || self.input_h == 0
            || !self.input_w.is_multiple_of(self.stride)
            || !self.input_h.is_multiple_of(self.stride)
        {
            return Err(Error::InvalidArgument(format!(
                "input {}x{} must be positive and divisible by stride {}",
                self.input_w, self.input_h, self.stride
            )));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidArgument("need at least one class".into()));
        }
        if !(self.gaussian_min_overlap > 0.0 && self.gaussian_min_overlap < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gaussian_min_overlap must lie in (0,1), got {}",
                self.gaussian_min_overlap
            )));
        }
        Ok(())
    }

    pub fn map_width(&self) -> usize {
        self.input_w / self.stride
    }

    pub fn map_height(&self) -> usize {
        self.input_h / self.stride
    }
}

/// Encoded targets plus the supervision support.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTensors {
    pub maps: DetectionMaps,
    /// One `(class, cell)` entry per annotation.
    pub positive_mask: Vec<(usize, Cell)>,
    /// Head-heatmap peak cells, one per annotation whose head lies on the map.
    pub head_peaks: Vec<Cell>,
}

impl TargetTensors {
    /// Object count used to normalize the losses.
    pub fn num_objects(&self) -> usize {
        self.positive_mask.len()
    }

    pub fn positive_cells(&self) -> Vec<Cell> {
        self.positive_mask.iter().map(|&(_, c)| c).collect()
    }
}

/// Anisotropic Gaussian shape: `Σ^{1/2} = R·diag(σx, σy)·Rᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceKernel {
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Degrees.
    pub theta: f64,
    pub sqrt: [[f64; 2]; 2],
    pub cov: [[f64; 2]; 2],
}

impl CovarianceKernel {
    pub fn from_sigmas(sigma_x: f64, sigma_y: f64, theta: f64) -> Result<Self> {
        if !(sigma_x > 0.0 && sigma_y > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigmas must be positive (σx={sigma_x}, σy={sigma_y})"
            )));
        }
        let sqrt = rotate_diag(sigma_x, sigma_y, theta);
        let cov = rotate_diag(sigma_x * sigma_x, sigma_y * sigma_y, theta);
        Ok(Self {
            sigma_x,
            sigma_y,
            theta,
            sqrt,
            cov,
        })
    }

    pub fn isotropic(sigma: f64) -> Result<Self> {
        Self::from_sigmas(sigma, sigma, 0.0)
    }

    pub fn inverse_cov(&self) -> [[f64; 2]; 2] {
        rotate_diag(
            1.0 / (self.sigma_x * self.sigma_x),
            1.0 / (self.sigma_y * self.sigma_y),
            self.theta,
        )
    }

    /// Unnormalized density `exp(−½ dᵀ Σ⁻¹ d)`.
    pub fn eval(&self, dx: f64, dy: f64) -> f64 {
        let inv = self.inverse_cov();
        let q = inv[0][0] * dx * dx + 2.0 * inv[0][1] * dx * dy + inv[1][1] * dy * dy;
        (-0.5 * q).exp()
    }

    /// Half extents of the 3σ ellipse's bounding box.
    pub fn window(&self) -> (f64, f64) {
        (3.0 * self.cov[0][0].sqrt(), 3.0 * self.cov[1][1].sqrt())
    }
}

/// `R·diag(a, b)·Rᵀ` with `R = [[cos, −sin], [sin, cos]]`.
fn rotate_diag(a: f64, b: f64, theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.to_radians().sin_cos();
    [
        [a * c * c + b * s * s, (a - b) * c * s],
        [(a - b) * c * s, a * s * s + b * c * c],
    ]
}

/// Size-adaptive radius from keypoint-detector practice: the smallest of the
/// three corner-shift radii that keep IoU above `min_overlap`.
pub fn gaussian_radius(w: f64, h: f64, min_overlap: f64) -> f64 {
    let o = min_overlap;

    let b1 = h + w;
    let c1 = w * h * (1.0 - o) / (1.0 + o);
    let r1 = (b1 + (b1 * b1 - 4.0 * c1).sqrt()) / 2.0;

    let b2 = 2.0 * (h + w);
    let c2 = (1.0 - o) * w * h;
    let r2 = (b2 + (b2 * b2 - 16.0 * c2).sqrt()) / 2.0;

    let a3 = 4.0 * o;
    let b3 = -2.0 * o * (h + w);
    let c3 = (o - 1.0) * w * h;
    let r3 = (b3 + (b3 * b3 - 4.0 * a3 * c3).sqrt()) / 2.0;

    r1.min(r2).min(r3)
}

/// Size-adaptive standard deviation for a box of map-scale size `(w, h)`.
pub fn size_adaptive_sigma(w: f64, h: f64, min_overlap: f64) -> f64 {
    gaussian_radius(w, h, min_overlap) / 3.0
}

pub fn gaussian_covariance(w: f64, h: f64, theta: f64, alpha: f64, min_overlap: f64) -> Result<CovarianceKernel> {
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kernel needs positive dimensions (w={w}, h={h})"
        )));
    }
    let sigma_p = size_adaptive_sigma(w, h, min_overlap);
    let geo = (w * h).sqrt();
    CovarianceKernel::from_sigmas(alpha * sigma_p * w / geo, alpha * sigma_p * h / geo, theta)
}

/// Cell containing a map-scale point.
fn cell_of(x: f64, y: f64) -> Cell {
    Cell::new(y.floor() as usize, x.floor() as usize)
}

/// Max-merges a kernel centered on the cell containing `center` (map scale).
/// The peak cell ends up exactly 1.
pub fn splat_rotated_gaussian(
    mut channel: ArrayViewMut2<'_, f64>,
    kernel: &CovarianceKernel,
    center: (f64, f64),
) -> Result<Cell> {
    let (rows, cols) = channel.dim();
    let (x, y) = center;
    if !(x >= 0.0 && y >= 0.0 && x < cols as f64 && y < rows as f64) {
        return Err(Error::OutOfBounds(format!(
            "kernel center ({x}, {y}) outside {cols}x{rows} map"
        )));
    }
    let peak = cell_of(x, y);
    let (ex, ey) = kernel.window();
    let (ex, ey) = (ex.ceil() as isize, ey.ceil() as isize);
    let (pr, pc) = (peak.row as isize, peak.col as isize);
    for r in (pr - ey).max(0)..=(pr + ey).min(rows as isize - 1) {
        for c in (pc - ex).max(0)..=(pc + ex).min(cols as isize - 1) {
            let v = kernel.eval((c - pc) as f64, (r - pr) as f64);
            let slot = &mut channel[[r as usize, c as usize]];
            if v > *slot {
                *slot = v;
            }
        }
    }
    channel[[peak.row, peak.col]] = 1.0;
    Ok(peak)
}

pub fn encode_targets(annotations: &[ChpBox], cfg: &EncodingConfig) -> Result<TargetTensors> {
    cfg.validate()?;
    let (mh, mw) = (cfg.map_height(), cfg.map_width());
    let stride = cfg.stride as f64;
    let mut maps = DetectionMaps::zeros(cfg.num_classes, mh, mw);
    let mut positive_mask = Vec::with_capacity(annotations.len());
    let mut head_peaks = Vec::with_capacity(annotations.len());

    for ann in annotations {
        ann.validate()?;
        if ann.class_id >= cfg.num_classes {
            return Err(Error::UnknownClass(format!(
                "class id {} (only {} classes configured)",
                ann.class_id, cfg.num_classes
            )));
        }
        if !(ann.cx >= 0.0 && ann.cy >= 0.0 && ann.cx < cfg.input_w as f64 && ann.cy < cfg.input_h as f64) {
            return Err(Error::OutOfBounds(format!(
                "center ({}, {}) outside {}x{} image",
                ann.cx, ann.cy, cfg.input_w, cfg.input_h
            )));
        }
        let rbox = chp_to_rbox(ann)?;
        let (w, h) = (ann.w / stride, ann.h / stride);
        let (mx, my) = (ann.cx / stride, ann.cy / stride);
        let kernel = gaussian_covariance(w, h, rbox.theta, cfg.alpha, cfg.gaussian_min_overlap)?;
        let channel = maps.center.index_axis_mut(ndarray::Axis(0), ann.class_id);
        let peak = splat_rotated_gaussian(channel, &kernel, (mx, my))?;

        if positive_mask.contains(&(ann.class_id, peak)) {
            warn!(
                "two class-{} objects share cell ({}, {}); regression targets keep the last one",
                ann.class_id, peak.row, peak.col
            );
        }
        positive_mask.push((ann.class_id, peak));
        let idx = |ch: usize| [ch, peak.row, peak.col];
        maps.center_offset[idx(0)] = mx - peak.col as f64;
        maps.center_offset[idx(1)] = my - peak.row as f64;
        maps.size[idx(0)] = w;
        maps.size[idx(1)] = h;
        maps.head_reg[idx(0)] = (ann.hx - ann.cx) / stride;
        maps.head_reg[idx(1)] = (ann.hy - ann.cy) / stride;

        let (hx, hy) = (ann.hx / stride, ann.hy / stride);
        if hx >= 0.0 && hy >= 0.0 && hx < mw as f64 && hy < mh as f64 {
            let sigma = size_adaptive_sigma(w, h, cfg.gaussian_min_overlap);
            let head_kernel = CovarianceKernel::isotropic(sigma)?;
            let channel = maps.head.index_axis_mut(ndarray::Axis(0), 0);
            let hpeak = splat_rotated_gaussian(channel, &head_kernel, (hx, hy))?;
            maps.head_offset[[0, hpeak.row, hpeak.col]] = hx - hpeak.col as f64;
            maps.head_offset[[1, hpeak.row, hpeak.col]] = hy - hpeak.row as f64;
            head_peaks.push(hpeak);
        } else {
            warn!(
                "head point ({}, {}) lies off the map; no head peak written",
                ann.hx, ann.hy
            );
        }
    }

    Ok(TargetTensors {
        maps,
        positive_mask,
        head_peaks,
    })
}
