//! Ship-length prior: detection scores are multiplied by the two-sided
//! Gaussian tail probability of the observed length deviation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ChpBox;

/// Per-class mean length in meters, plus the shared spread coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassLengthTable {
    /// Mean length per class id, meters.
    pub mean_length: BTreeMap<usize, f64>,
    /// Standard deviation as a fraction of the mean.
    pub lambda: f64,
    /// Meters per pixel.
    pub gsd: f64,
}

impl ClassLengthTable {
    pub fn new(mean_length: BTreeMap<usize, f64>, lambda: f64, gsd: f64) -> Result<Self> {
        let table = Self {
            mean_length,
            lambda,
            gsd,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !(self.gsd > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda ({}) and gsd ({}) must be positive",
                self.lambda, self.gsd
            )));
        }
        if let Some((class, len)) = self.mean_length.iter().find(|(_, l)| !(**l > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "class {class} has non-positive mean length {len}"
            )));
        }
        Ok(())
    }
}

/// `2·(1 − Φ(|l − L| / (λ·L)))`; equals 1 when `l == L`.
pub fn size_prior_probability(length: f64, mean_length: f64, lambda: f64) -> f64 {
    let delta = mean_length * lambda;
    let z = (length - mean_length).abs() / delta;
    libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Multiplies every score by the prior of its class; geometry and order are untouched.
pub fn refine_scores(dets: &[ChpBox], table: &ClassLengthTable) -> Result<Vec<ChpBox>> {
    table.validate()?;
    dets.iter()
        .map(|d| {
            let mean = table
                .mean_length
                .get(&d.class_id)
                .ok_or_else(|| Error::UnknownClass(format!("class id {}", d.class_id)))?;
            let p = size_prior_probability(d.h * table.gsd, *mean, table.lambda);
            Ok(ChpBox {
                score: d.score * p,
                ..*d
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn table(lambda: f64) -> ClassLengthTable {
        ClassLengthTable::new(BTreeMap::from([(0, 172.8), (1, 100.0)]), lambda, 1.0).unwrap()
    }

    #[test]
    fn probability_examples() {
        assert_eq!(size_prior_probability(172.8, 172.8, 0.2), 1.0);
        let delta = 172.8 * 0.2;
        assert_abs_diff_eq!(
            size_prior_probability(172.8 + delta, 172.8, 0.2),
            0.31731,
            epsilon = 1e-3
        );
        assert_abs_diff_eq!(
            size_prior_probability(172.8 - 3.0 * delta, 172.8, 0.2),
            0.00270,
            epsilon = 1e-4
        );
    }

    #[test]
    fn refine_examples() {
        let det = |h: f64, score: f64| ChpBox::new(0.0, 0.0, 10.0, h, 0.0, -h / 2.0, 1).with_score(score);
        let out = refine_scores(&[det(100.0, 0.9), det(120.0, 0.9)], &table(0.2)).unwrap();
        assert_eq!(out[0].score, 0.9);
        assert_abs_diff_eq!(out[1].score, 0.9 * 0.317_310_507_862_914, epsilon = 1e-9);
        assert_eq!(out[1].h, 120.0);

        let loose = refine_scores(&[det(120.0, 0.9)], &table(1e9)).unwrap();
        assert_abs_diff_eq!(loose[0].score, 0.9, epsilon = 1e-6);

        let mut stray = det(100.0, 0.5);
        stray.class_id = 7;
        let err = refine_scores(&[stray], &table(0.2)).unwrap_err();
        assert!(err.to_string().contains('7'));
    }

    #[test]
    fn table_validation() {
        assert!(ClassLengthTable::new(BTreeMap::from([(0, 10.0)]), 0.0, 1.0).is_err());
        assert!(ClassLengthTable::new(BTreeMap::from([(0, -1.0)]), 0.2, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn bounded_symmetric_and_monotone(mean in 10.0..400.0f64, dev in 0.0..300.0f64,
                                          extra in 0.01..50.0f64, lambda in 0.05..1.0f64) {
            let p = size_prior_probability(mean + dev, mean, lambda);
            prop_assert!(p > 0.0 || dev / (mean * lambda) > 37.0);
            prop_assert!(p <= 1.0);
            prop_assert!((p - size_prior_probability(mean - dev, mean, lambda)).abs() < 1e-15);
            let further = size_prior_probability(mean + dev + extra, mean, lambda);
            prop_assert!(further <= p);
            if dev > 0.0 {
                prop_assert!(size_prior_probability(mean + dev, mean, lambda * 1.5) >= p);
            }
        }
    }
}
