use serde::Serialize;
use thiserror::Error;

use super::summary::RunSummary;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("only {found} checkpoints in window [{lo}, {hi}]; need at least 4")]
    InsufficientPoints { found: usize, lo: usize, hi: usize },
    #[error("mse_mean = {value} at checkpoint {checkpoint} is not positive")]
    NonPositive { checkpoint: usize, value: f64 },
}

/// Least-squares line `log(mse) ≈ log_constant + exponent · log(j + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub exponent: f64,
    pub log_constant: f64,
    pub r2: f64,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 4;

/// Fits the checkpoints `j` with `lo ≤ j ≤ hi`.
pub fn fit_rate(summary: &RunSummary, window: (usize, usize)) -> Result<RateFit, FitError> {
    let (lo, hi) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in summary.rows.iter().filter(|r| r.checkpoint >= lo && r.checkpoint <= hi) {
        if !(row.mse_mean > 0.0) {
            return Err(FitError::NonPositive {
                checkpoint: row.checkpoint,
                value: row.mse_mean,
            });
        }
        xs.push(((row.checkpoint + 1) as f64).ln());
        ys.push(row.mse_mean.ln());
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(FitError::InsufficientPoints {
            found: xs.len(),
            lo,
            hi,
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let exponent = sxy / sxx;
    let log_constant = my - exponent * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (log_constant + exponent * x);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(RateFit {
        exponent,
        log_constant,
        r2,
        points: xs.len(),
    })
}
