//! Streaming estimators of the minimizer built from an iterate sequence.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("estimator has no observations")]
    Empty,
    #[error("observation index {got} does not follow {last}")]
    OutOfOrder { last: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("unknown estimator {0:?}; expected one of last, suffix, weighted")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Last,
    /// Arithmetic mean of `θ_i` for `i ≥ start`.
    SuffixAverage {
        start: usize,
    },
    /// `Σ (i+1) θ_i / Σ (i+1)`.
    WeightedAverage,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Last => "last",
            EstimatorKind::SuffixAverage { .. } => "suffix",
            EstimatorKind::WeightedAverage => "weighted",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last" => Ok(EstimatorKind::Last),
            "suffix" => Ok(EstimatorKind::SuffixAverage { start: 0 }),
            "weighted" => Ok(EstimatorKind::WeightedAverage),
            other => Err(EstimatorError::Unknown(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningEstimator {
    kind: EstimatorKind,
    accumulator: Vec<f64>,
    weight_total: f64,
    count: usize,
    last_index: Option<usize>,
}

impl RunningEstimator {
    pub fn new(kind: EstimatorKind, dim: usize) -> Self {
        Self {
            kind,
            accumulator: vec![0.0; dim],
            weight_total: 0.0,
            count: 0,
            last_index: None,
        }
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// Number of iterates contributing to the estimate.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Forgets all observations, keeping the kind.
    pub fn reset(&mut self) {
        self.accumulator.iter_mut().for_each(|a| *a = 0.0);
        self.weight_total = 0.0;
        self.count = 0;
        self.last_index = None;
    }

    /// Feeds iterate `θ_j`; indices must strictly increase.
    pub fn observe(&mut self, theta: &[f64], j: usize) -> Result<(), EstimatorError> {
        if theta.len() != self.accumulator.len() {
            return Err(EstimatorError::DimensionMismatch {
                expected: self.accumulator.len(),
                actual: theta.len(),
            });
        }
        if let Some(last) = self.last_index {
            if j <= last {
                return Err(EstimatorError::OutOfOrder { last, got: j });
            }
        }
        self.last_index = Some(j);
        match self.kind {
            EstimatorKind::Last => {
                self.accumulator.copy_from_slice(theta);
                self.weight_total = 1.0;
                self.count = 1;
            }
            EstimatorKind::SuffixAverage { start } => {
                if j >= start {
                    for (a, t) in self.accumulator.iter_mut().zip(theta) {
                        *a += t;
                    }
                    self.weight_total += 1.0;
                    self.count += 1;
                }
            }
            EstimatorKind::WeightedAverage => {
                let w = (j + 1) as f64;
                for (a, t) in self.accumulator.iter_mut().zip(theta) {
                    *a += w * t;
                }
                self.weight_total += w;
                self.count += 1;
            }
        }
        Ok(())
    }

    pub fn current(&self) -> Result<Vec<f64>, EstimatorError> {
        let mut out = vec![0.0; self.accumulator.len()];
        self.current_into(&mut out)?;
        Ok(out)
    }

    pub fn current_into(&self, out: &mut [f64]) -> Result<(), EstimatorError> {
        if self.count == 0 {
            return Err(EstimatorError::Empty);
        }
        if self.kind == EstimatorKind::Last {
            out.copy_from_slice(&self.accumulator);
            return Ok(());
        }
        for (o, a) in out.iter_mut().zip(&self.accumulator) {
            *o = a / self.weight_total;
        }
        Ok(())
    }

    /// `‖estimate − target‖²` without allocating.
    pub fn squared_error(&self, target: &[f64]) -> Result<f64, EstimatorError> {
        if self.count == 0 {
            return Err(EstimatorError::Empty);
        }
        if self.kind == EstimatorKind::Last {
            return Ok(vector::dist_sq(&self.accumulator, target));
        }
        Ok(self
            .accumulator
            .iter()
            .zip(target)
            .map(|(a, t)| {
                let d = a / self.weight_total - t;
                d * d
            })
            .sum())
    }
}
