use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Mat, Tensor3};

/// `(‖J − Ĵ‖² / ‖J‖², ‖F − F̂‖² / ‖F‖²)`.
pub fn error_metrics(j: &Tensor3, j_hat: &Tensor3, f: &Mat, f_hat: &Mat) -> Result<(f64, f64)> {
    if f.shape() != f_hat.shape() {
        return Err(Error::DimensionMismatch(format!(
            "F {:?} vs {:?}",
            f.shape(),
            f_hat.shape()
        )));
    }
    let (jn, fn_) = (j.fro_norm_sq(), f.fro_norm_sq());
    if jn == 0.0 {
        return Err(Error::ZeroDenominator("Error(J)"));
    }
    if fn_ == 0.0 {
        return Err(Error::ZeroDenominator("Error(F)"));
    }
    Ok((
        j.sub(j_hat)?.fro_norm_sq() / jn,
        f.sub(f_hat).fro_norm_sq() / fn_,
    ))
}

/// Per-output relative RMSE in percent:
/// `100 · sqrt(Σ_s (f_i − f̂_i)² / Σ_s (f_i − mean f_i)²)`. Rows are outputs.
pub fn rrmse(truth: &Mat, pred: &Mat) -> Result<Vec<f64>> {
    if truth.shape() != pred.shape() {
        return Err(Error::DimensionMismatch(format!(
            "targets {:?} vs predictions {:?}",
            truth.shape(),
            pred.shape()
        )));
    }
    if truth.cols() < 2 {
        return Err(Error::DimensionMismatch(
            "RRMSE needs at least two points".into(),
        ));
    }
    (0..truth.rows())
        .map(|i| {
            let t = truth.row(i);
            let p = pred.row(i);
            let mean = t.iter().sum::<f64>() / t.len() as f64;
            let den: f64 = t.iter().map(|v| (v - mean).powi(2)).sum();
            if den == 0.0 {
                return Err(Error::ZeroVariance(i));
            }
            let num: f64 = t.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum();
            Ok(100.0 * (num / den).sqrt())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (`n − 1` denominator); zero for one value.
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary {
            mean,
            median,
            std,
            count: n,
        })
    }
}
