use serde::Serialize;

use super::summary::RunSummary;
use super::ExperimentError;
use crate::bounds::{BoundSequence, EnvelopeShape, RateEnvelope};

/// Standard errors of slack granted to the empirical mean.
pub const SEM_MARGIN: f64 = 3.0;

/// What the empirical MSE is compared against.
#[derive(Debug, Clone, PartialEq)]
pub enum Bound<'a> {
    Sequence(&'a BoundSequence),
    Envelope(RateEnvelope),
    /// Envelope whose constant is fitted on the first half of the
    /// checkpoints and tested on the second half.
    Uncalibrated(EnvelopeShape),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointVerdict {
    pub checkpoint: usize,
    pub mse_mean: f64,
    pub mse_sem: f64,
    pub bound: f64,
    /// False for checkpoints used only for calibration.
    pub tested: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub verdicts: Vec<CheckpointVerdict>,
    pub violations: usize,
    pub first_violation: Option<usize>,
    pub tested: usize,
    pub calibrated_constant: Option<f64>,
}

impl DominanceReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Verdict `mse_mean ≤ bound + 3·mse_sem` at every tested checkpoint.
pub fn dominance_check(summary: &RunSummary, bound: &Bound) -> Result<DominanceReport, ExperimentError> {
    let rows = &summary.rows;
    let shape_at = |shape: &EnvelopeShape, j: usize| shape.eval(j as f64).map_err(ExperimentError::from);

    let (values, first_tested, calibrated_constant) = match bound {
        Bound::Sequence(seq) => {
            let values = rows
                .iter()
                .map(|r| {
                    seq.at(r.checkpoint).ok_or_else(|| {
                        ExperimentError::Invalid(format!(
                            "bound sequence has {} values; checkpoint {} is beyond it",
                            seq.len(),
                            r.checkpoint
                        ))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            (values, 0, None)
        }
        Bound::Envelope(env) => {
            let values = rows
                .iter()
                .map(|r| env.eval(r.checkpoint as f64).map_err(ExperimentError::from))
                .collect::<Result<Vec<_>, _>>()?;
            (values, 0, None)
        }
        Bound::Uncalibrated(shape) => {
            let half = rows.len() / 2;
            if half == 0 {
                return Err(ExperimentError::Invalid(
                    "calibration needs at least two checkpoints".into(),
                ));
            }
            let mut constant = 0.0f64;
            for r in &rows[..half] {
                constant = constant.max(r.mse_mean / shape_at(shape, r.checkpoint)?);
            }
            let env = RateEnvelope::new(*shape, constant)?;
            let values = rows
                .iter()
                .map(|r| env.eval(r.checkpoint as f64).map_err(ExperimentError::from))
                .collect::<Result<Vec<_>, _>>()?;
            (values, half, Some(constant))
        }
    };

    let verdicts: Vec<CheckpointVerdict> = rows
        .iter()
        .zip(&values)
        .enumerate()
        .map(|(k, (r, &b))| {
            let tested = k >= first_tested;
            CheckpointVerdict {
                checkpoint: r.checkpoint,
                mse_mean: r.mse_mean,
                mse_sem: r.mse_sem,
                bound: b,
                tested,
                pass: !tested || r.mse_mean <= b + SEM_MARGIN * r.mse_sem,
            }
        })
        .collect();
    let violations = verdicts.iter().filter(|v| !v.pass).count();
    let first_violation = verdicts.iter().find(|v| !v.pass).map(|v| v.checkpoint);
    Ok(DominanceReport {
        tested: verdicts.iter().filter(|v| v.tested).count(),
        verdicts,
        violations,
        first_violation,
        calibrated_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{CheckpointStat, RunMetadata};

    fn summary(values: &[(usize, f64, f64)]) -> RunSummary {
        RunSummary {
            estimator: None,
            rows: values
                .iter()
                .map(|&(checkpoint, mse_mean, mse_sem)| CheckpointStat {
                    checkpoint,
                    mse_mean,
                    mse_sem,
                })
                .collect(),
            metadata: RunMetadata::default(),
        }
    }

    fn seq(values: Vec<f64>) -> BoundSequence {
        BoundSequence {
            values,
            description: String::new(),
        }
    }

    #[test]
    fn zero_bound_flags_every_noisy_checkpoint() {
        let s = summary(&[(1, 0.5, 0.01), (2, 0.3, 0.01), (3, 0.2, 0.02)]);
        let b = seq(vec![0.0; 4]);
        let r = dominance_check(&s, &Bound::Sequence(&b)).unwrap();
        assert_eq!(r.violations, 3);
        assert_eq!(r.first_violation, Some(1));
    }

    #[test]
    fn diameter_cap_never_violated() {
        let s = summary(&[(1, 3.9, 0.1), (5, 1.0, 0.1)]);
        let b = seq(vec![4.0; 6]);
        assert!(dominance_check(&s, &Bound::Sequence(&b)).unwrap().passed());
    }

    #[test]
    fn margin_is_three_sems() {
        let s = summary(&[(0, 1.3, 0.1), (1, 1.31, 0.1)]);
        let b = seq(vec![1.0, 1.0]);
        let r = dominance_check(&s, &Bound::Sequence(&b)).unwrap();
        assert!(r.verdicts[0].pass);
        assert!(!r.verdicts[1].pass);
    }

    #[test]
    fn short_sequence_is_an_error() {
        let s = summary(&[(10, 1.0, 0.0)]);
        let b = seq(vec![1.0; 5]);
        assert!(dominance_check(&s, &Bound::Sequence(&b)).is_err());
    }

    #[test]
    fn calibration_is_out_of_sample() {
        // Exactly 2/(N+1): the calibrated constant is 2 and the rest sits on the envelope.
        let rows: Vec<(usize, f64, f64)> = (1..=8).map(|j| (j, 2.0 / (j as f64 + 1.0), 0.0)).collect();
        let r = dominance_check(&summary(&rows), &Bound::Uncalibrated(EnvelopeShape::InvN)).unwrap();
        assert!((r.calibrated_constant.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(r.tested, 4);
        assert!(r.verdicts[..4].iter().all(|v| !v.tested));
        // A curve that decays slower than the envelope is caught in the second half.
        let slow: Vec<(usize, f64, f64)> = (1..=8).map(|j| (j, (j as f64 + 1.0).powf(-0.3), 0.0)).collect();
        let r = dominance_check(&summary(&slow), &Bound::Uncalibrated(EnvelopeShape::InvN)).unwrap();
        assert_eq!(r.violations, 4);
    }
}
