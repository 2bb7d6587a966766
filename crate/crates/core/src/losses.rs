//! Training objectives with analytic gradients.

use ndarray::{Array, ArrayView, ArrayView3, Dimension, Ix3, Zip};

use crate::error::{Error, Result};
use crate::maps::{Cell, DetectionMaps};
use crate::target_encoder::TargetTensors;

/// Predictions are clamped into `[PRED_CLAMP, 1 - PRED_CLAMP]` before taking logs.
pub const PRED_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossConfig {
    pub gamma: f64,
    pub beta: f64,
    pub lambda_o: f64,
    pub lambda_s: f64,
    pub lambda_hr: f64,
    pub lambda_he: f64,
    pub lambda_ho: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            beta: 4.0,
            lambda_o: 1.0,
            lambda_s: 0.1,
            lambda_hr: 1.0,
            lambda_he: 1.0,
            lambda_ho: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.gamma,
            self.beta,
            self.lambda_o,
            self.lambda_s,
            self.lambda_hr,
            self.lambda_he,
            self.lambda_ho,
        ];
        if all.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "loss hyper-parameters must be non-negative: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Scalar loss and its gradient with respect to the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult<D: Dimension> {
    pub value: f64,
    pub gradient: Array<f64, D>,
}

/// Penalty-reduced focal loss over a heatmap, normalized by the object count.
pub fn variant_focal_loss<D: Dimension>(
    pred: ArrayView<'_, f64, D>,
    target: ArrayView<'_, f64, D>,
    n_objects: usize,
    cfg: &LossConfig,
) -> Result<LossResult<D>> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if n_objects == 0 {
        return Err(Error::NoPositives);
    }
    cfg.validate()?;
    let (gamma, beta) = (cfg.gamma, cfg.beta);
    let n = n_objects as f64;

    let mut value = 0.0;
    let mut gradient = Array::zeros(pred.raw_dim());
    // Zip iterates in logical order, so the sum is reproducible.
    Zip::from(&mut gradient).and(&pred).and(&target).for_each(|g, &p, &t| {
        let p = p.clamp(PRED_CLAMP, 1.0 - PRED_CLAMP);
        let q = 1.0 - p;
        if t == 1.0 {
            let f = q.powf(gamma) * p.ln();
            let dq = if gamma == 0.0 {
                0.0
            } else {
                -gamma * q.powf(gamma - 1.0) * p.ln()
            };
            let df = dq + q.powf(gamma) / p;
            value -= f;
            *g = -df / n;
        } else {
            let weight = (1.0 - t).powf(beta);
            let f = weight * p.powf(gamma) * q.ln();
            let dp = if gamma == 0.0 {
                0.0
            } else {
                gamma * p.powf(gamma - 1.0) * q.ln()
            };
            let df = weight * (dp - p.powf(gamma) / q);
            value -= f;
            *g = -df / n;
        }
    });
    Ok(LossResult {
        value: (value / n).max(0.0),
        gradient,
    })
}

/// L1 regression loss over the listed cells; every channel of `pred` is supervised.
///
/// The subgradient at `pred == target` is 0.
pub fn masked_l1_loss(
    pred: ArrayView3<'_, f64>,
    target: ArrayView3<'_, f64>,
    cells: &[Cell],
    n_objects: usize,
) -> Result<LossResult<Ix3>> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    if cells.is_empty() {
        return Err(Error::EmptyMask);
    }
    if n_objects == 0 {
        return Err(Error::NoPositives);
    }
    let (channels, rows, cols) = pred.dim();
    let n = n_objects as f64;
    let mut value = 0.0;
    let mut gradient = Array::zeros(pred.raw_dim());
    for cell in cells {
        if cell.row >= rows || cell.col >= cols {
            return Err(Error::ShapeMismatch(format!(
                "mask cell ({}, {}) outside {rows}x{cols} map",
                cell.row, cell.col
            )));
        }
        for ch in 0..channels {
            let idx = [ch, cell.row, cell.col];
            let d = pred[idx] - target[idx];
            value += d.abs();
            gradient[idx] += sign(d) / n;
        }
    }
    Ok(LossResult {
        value: value / n,
        gradient,
    })
}

fn sign(d: f64) -> f64 {
    if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// The six weighted terms of the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LossTerm {
    Center,
    Offset,
    Size,
    HeadReg,
    HeadHeat,
    HeadOffset,
}

impl LossTerm {
    pub const ALL: [LossTerm; 6] = [
        LossTerm::Center,
        LossTerm::Offset,
        LossTerm::Size,
        LossTerm::HeadReg,
        LossTerm::HeadHeat,
        LossTerm::HeadOffset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossTerm::Center => "center",
            LossTerm::Offset => "offset",
            LossTerm::Size => "size",
            LossTerm::HeadReg => "head_reg",
            LossTerm::HeadHeat => "head_heat",
            LossTerm::HeadOffset => "head_offset",
        }
    }

    pub fn weight(self, cfg: &LossConfig) -> f64 {
        match self {
            LossTerm::Center => 1.0,
            LossTerm::Offset => cfg.lambda_o,
            LossTerm::Size => cfg.lambda_s,
            LossTerm::HeadReg => cfg.lambda_hr,
            LossTerm::HeadHeat => cfg.lambda_he,
            LossTerm::HeadOffset => cfg.lambda_ho,
        }
    }
}

pub fn total_loss(parts: &[(LossTerm, f64)], cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    let mut total = 0.0;
    for term in LossTerm::ALL {
        let mut found = parts.iter().filter(|(t, _)| *t == term);
        let (_, value) = found.next().ok_or(Error::MissingLossPart(term.name()))?;
        if found.next().is_some() {
            return Err(Error::InvalidArgument(format!(
                "loss part `{}` given twice",
                term.name()
            )));
        }
        if !(*value >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "loss part `{}` must be non-negative, got {value}",
                term.name()
            )));
        }
        total += term.weight(cfg) * value;
    }
    Ok(total)
}

/// Evaluates all six terms of predicted maps against encoded targets.
pub fn loss_parts(pred: &DetectionMaps, targets: &TargetTensors, cfg: &LossConfig) -> Result<Vec<(LossTerm, f64)>> {
    pred.check_shapes()?;
    let n = targets.num_objects();
    let t = &targets.maps;
    let centers = targets.positive_cells();
    let center = variant_focal_loss(pred.center.view(), t.center.view(), n, cfg)?.value;
    let head_heat = variant_focal_loss(pred.head.view(), t.head.view(), n, cfg)?.value;
    let l1 = |p: &ndarray::Array3<f64>, q: &ndarray::Array3<f64>, cells: &[Cell]| {
        if cells.is_empty() {
            Ok(0.0)
        } else {
            masked_l1_loss(p.view(), q.view(), cells, n).map(|r| r.value)
        }
    };
    Ok(vec![
        (LossTerm::Center, center),
        (LossTerm::Offset, l1(&pred.center_offset, &t.center_offset, &centers)?),
        (LossTerm::Size, l1(&pred.size, &t.size, &centers)?),
        (LossTerm::HeadReg, l1(&pred.head_reg, &t.head_reg, &centers)?),
        (LossTerm::HeadHeat, head_heat),
        (
            LossTerm::HeadOffset,
            l1(&pred.head_offset, &t.head_offset, &targets.head_peaks)?,
        ),
    ])
}
