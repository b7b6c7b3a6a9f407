//! Nadaraya–Watson kernel regression with a Gaussian product kernel.

use crate::error::{check_len, Error, Result};
use crate::numerics::RowMatrix;

/// Multipliers of the Silverman bandwidth tried by [`BandwidthRule::Loocv`].
pub const LOOCV_GRID: [f64; 7] = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// `h_j = sd_j * (4 / ((d + 2) n))^(1 / (d + 4))`.
    Silverman,
    /// Silverman scaled by the [`LOOCV_GRID`] multiplier with the lowest
    /// leave-one-out squared error.
    Loocv,
    /// The same bandwidth for every feature.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    features: RowMatrix,
    targets: Vec<f64>,
    bandwidth: Vec<f64>,
    mean: f64,
}

/// A prediction and whether it fell back to the training mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrPrediction {
    pub value: f64,
    pub extrapolated: bool,
}

impl KernelModel {
    pub fn new(features: RowMatrix, targets: Vec<f64>, bandwidth: Vec<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::invalid("kernel regression needs a non-empty training set"));
        }
        check_len("kernel targets", features.nrows(), targets.len())?;
        check_len("kernel bandwidths", features.ncols(), bandwidth.len())?;
        if !bandwidth.iter().all(|h| *h > 0.0 && !h.is_nan()) {
            return Err(Error::invalid("kernel bandwidths must be positive"));
        }
        if !features.all_finite() || !targets.iter().all(|t| t.is_finite()) {
            return Err(Error::invalid("kernel training data must be finite"));
        }
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        Ok(KernelModel {
            features,
            targets,
            bandwidth,
            mean,
        })
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn features(&self) -> &RowMatrix {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn predict(&self, x: &[f64]) -> Result<KrPrediction> {
        check_len("kernel query width", self.features.ncols(), x.len())?;
        Ok(self.predict_excluding(x, None))
    }

    fn predict_excluding(&self, x: &[f64], skip: Option<usize>) -> KrPrediction {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (row, y)) in self.features.rows_iter().zip(&self.targets).enumerate() {
            if skip == Some(i) {
                continue;
            }
            let d2: f64 = row
                .iter()
                .zip(x)
                .zip(&self.bandwidth)
                .map(|((a, b), h)| {
                    let z = (a - b) / h;
                    z * z
                })
                .sum();
            let w = (-0.5 * d2).exp();
            num += w * y;
            den += w;
        }
        if den > 0.0 {
            KrPrediction {
                value: num / den,
                extrapolated: false,
            }
        } else {
            KrPrediction {
                value: self.mean,
                extrapolated: true,
            }
        }
    }

    fn loo_error(&self) -> f64 {
        (0..self.targets.len())
            .map(|i| {
                let p = self.predict_excluding(self.features.row(i), Some(i)).value;
                (p - self.targets[i]).powi(2)
            })
            .sum()
    }
}

fn silverman(features: &RowMatrix) -> Vec<f64> {
    let (n, d) = (features.nrows(), features.ncols());
    let factor = (4.0 / ((d as f64 + 2.0) * n as f64)).powf(1.0 / (d as f64 + 4.0));
    (0..d)
        .map(|j| {
            let sd = if n > 1 {
                let mean = (0..n).map(|i| features.get(i, j)).sum::<f64>() / n as f64;
                ((0..n).map(|i| (features.get(i, j) - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            if sd > 0.0 {
                sd * factor
            } else {
                factor
            }
        })
        .collect()
}

pub fn fit_kr(features: &RowMatrix, targets: &[f64], rule: BandwidthRule) -> Result<KernelModel> {
    if features.nrows() == 0 {
        return Err(Error::invalid("kernel regression needs a non-empty training set"));
    }
    let bandwidth = match rule {
        BandwidthRule::Fixed(h) => vec![h; features.ncols()],
        BandwidthRule::Silverman => silverman(features),
        BandwidthRule::Loocv => {
            let base = silverman(features);
            let mut best: Option<(f64, f64)> = None;
            if features.nrows() > 1 {
                for m in LOOCV_GRID {
                    let h: Vec<f64> = base.iter().map(|b| b * m).collect();
                    let err = KernelModel::new(features.clone(), targets.to_vec(), h)?.loo_error();
                    if best.is_none_or(|(_, e)| err < e) {
                        best = Some((m, err));
                    }
                }
            }
            let m = best.map_or(1.0, |(m, _)| m);
            base.iter().map(|b| b * m).collect()
        }
    };
    KernelModel::new(features.clone(), targets.to_vec(), bandwidth)
}

pub fn predict_kr(model: &KernelModel, x: &[f64]) -> Result<f64> {
    Ok(model.predict(x)?.value)
}
