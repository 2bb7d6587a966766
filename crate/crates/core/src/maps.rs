//! The six per-image output maps shared by the encoder and decoder.

use ndarray::Array3;

use crate::error::{Error, Result};

/// Integer location on an output map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Center heatmaps (`C×H×W`), center offset, size, head regression,
/// head heatmap (`1×H×W`) and head offset (each `2×H×W`, x channel first).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMaps {
    pub center: Array3<f64>,
    pub center_offset: Array3<f64>,
    pub size: Array3<f64>,
    pub head_reg: Array3<f64>,
    pub head: Array3<f64>,
    pub head_offset: Array3<f64>,
}

pub const MAP_NAMES: [&str; 6] = ["center", "center_offset", "size", "head_reg", "head", "head_offset"];

impl DetectionMaps {
    pub fn zeros(num_classes: usize, height: usize, width: usize) -> Self {
        Self {
            center: Array3::zeros((num_classes, height, width)),
            center_offset: Array3::zeros((2, height, width)),
            size: Array3::zeros((2, height, width)),
            head_reg: Array3::zeros((2, height, width)),
            head: Array3::zeros((1, height, width)),
            head_offset: Array3::zeros((2, height, width)),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.center.dim().0
    }

    /// `(height, width)` of the output grid.
    pub fn grid(&self) -> (usize, usize) {
        let (_, h, w) = self.center.dim();
        (h, w)
    }

    pub fn by_name(&self, name: &str) -> Option<&Array3<f64>> {
        match name {
            "center" => Some(&self.center),
            "center_offset" => Some(&self.center_offset),
            "size" => Some(&self.size),
            "head_reg" => Some(&self.head_reg),
            "head" => Some(&self.head),
            "head_offset" => Some(&self.head_offset),
            _ => None,
        }
    }

    /// Assembles maps in [`MAP_NAMES`] order and checks their shapes.
    pub fn from_parts(parts: [Array3<f64>; 6]) -> Result<Self> {
        let [center, center_offset, size, head_reg, head, head_offset] = parts;
        let maps = Self {
            center,
            center_offset,
            size,
            head_reg,
            head,
            head_offset,
        };
        maps.check_shapes()?;
        Ok(maps)
    }

    pub fn check_shapes(&self) -> Result<()> {
        let (c, h, w) = self.center.dim();
        if c == 0 {
            return Err(Error::ShapeMismatch("center map has no classes".into()));
        }
        let expect = [
            ("center_offset", &self.center_offset, 2),
            ("size", &self.size, 2),
            ("head_reg", &self.head_reg, 2),
            ("head", &self.head, 1),
            ("head_offset", &self.head_offset, 2),
        ];
        for (name, arr, channels) in expect {
            if arr.dim() != (channels, h, w) {
                return Err(Error::ShapeMismatch(format!(
                    "{name} is {:?}, expected {:?}",
                    arr.dim(),
                    (channels, h, w)
                )));
            }
        }
        Ok(())
    }
}
