//! Step-size and momentum-weight sequences indexed from `j = 0`.
//!
//! Formulas use `(j + 1)` so that `t_0 = γ` for the polynomial family.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Ceiling applied to momentum weights that are proportional to the step.
pub const MOMENTUM_CEILING: f64 = 1.0 - 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("gamma must be positive and finite, got {0}")]
    Gamma(f64),
    #[error("alpha = {0}: α ∈ (0,1] required")]
    Alpha(f64),
    #[error("step size must be positive and finite, got {0}")]
    Step(f64),
    #[error("staged schedule needs at least one stage")]
    NoStages,
    #[error("stage {index} has zero length")]
    EmptyStage { index: usize },
    #[error("stage step sizes must strictly decrease (stage {index}: {previous} then {next})")]
    NotDecreasing { index: usize, previous: f64, next: f64 },
    #[error("step schedule exhausted at j = {index} (total length {total})")]
    Exhausted { index: usize, total: usize },
    #[error("momentum parameter {name} = {value} is invalid: {reason}")]
    Momentum {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stage {
    pub step: f64,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepSchedule {
    /// `t_j = γ / (j + 1)^α`.
    Polynomial {
        gamma: f64,
        alpha: f64,
    },
    Constant {
        step: f64,
    },
    /// Constant `a_k` for `n_k` consecutive iterations, stage after stage.
    Staged(Vec<Stage>),
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl StepSchedule {
    pub fn polynomial(gamma: f64, alpha: f64) -> Result<Self, ScheduleError> {
        if !positive(gamma) {
            return Err(ScheduleError::Gamma(gamma));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(ScheduleError::Alpha(alpha));
        }
        Ok(Self::Polynomial { gamma, alpha })
    }

    pub fn constant(step: f64) -> Result<Self, ScheduleError> {
        if !positive(step) {
            return Err(ScheduleError::Step(step));
        }
        Ok(Self::Constant { step })
    }

    pub fn staged(stages: Vec<Stage>) -> Result<Self, ScheduleError> {
        if stages.is_empty() {
            return Err(ScheduleError::NoStages);
        }
        for (index, s) in stages.iter().enumerate() {
            if !positive(s.step) {
                return Err(ScheduleError::Step(s.step));
            }
            if s.length == 0 {
                return Err(ScheduleError::EmptyStage { index });
            }
        }
        for (index, w) in stages.windows(2).enumerate() {
            if w[1].step >= w[0].step {
                return Err(ScheduleError::NotDecreasing {
                    index: index + 1,
                    previous: w[0].step,
                    next: w[1].step,
                });
            }
        }
        Ok(Self::Staged(stages))
    }

    /// Total number of iterations a staged schedule covers; unbounded otherwise.
    pub fn total_length(&self) -> Option<usize> {
        match self {
            StepSchedule::Staged(stages) => Some(stages.iter().map(|s| s.length).sum()),
            _ => None,
        }
    }

    pub fn step_size(&self, j: usize) -> Result<f64, ScheduleError> {
        match self {
            StepSchedule::Polynomial { gamma, alpha } => {
                let base = (j + 1) as f64;
                Ok(if *alpha == 1.0 {
                    gamma / base
                } else {
                    gamma / base.powf(*alpha)
                })
            }
            StepSchedule::Constant { step } => Ok(*step),
            StepSchedule::Staged(stages) => {
                let mut end = 0;
                for s in stages {
                    end += s.length;
                    if j < end {
                        return Ok(s.step);
                    }
                }
                Err(ScheduleError::Exhausted { index: j, total: end })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentumSchedule {
    Zero,
    Constant {
        eta: f64,
    },
    /// `η_j = c / (j + 1)^β`; `β > 1` gives summable weights.
    Polynomial {
        c: f64,
        beta: f64,
    },
    /// `η_j = min(k·t_j, 1 − 10⁻¹²)`.
    ProportionalToStep {
        k: f64,
    },
}

impl MomentumSchedule {
    /// Any finite nonnegative weight is accepted; `validate` reports `η ≥ 1`.
    pub fn constant(eta: f64) -> Result<Self, ScheduleError> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(ScheduleError::Momentum {
                name: "eta",
                value: eta,
                reason: "must be finite and nonnegative",
            });
        }
        Ok(Self::Constant { eta })
    }

    pub fn polynomial(c: f64, beta: f64) -> Result<Self, ScheduleError> {
        if !positive(c) {
            return Err(ScheduleError::Momentum {
                name: "c",
                value: c,
                reason: "must be positive",
            });
        }
        if !positive(beta) {
            return Err(ScheduleError::Momentum {
                name: "beta",
                value: beta,
                reason: "must be positive",
            });
        }
        Ok(Self::Polynomial { c, beta })
    }

    pub fn proportional_to_step(k: f64) -> Result<Self, ScheduleError> {
        if !positive(k) {
            return Err(ScheduleError::Momentum {
                name: "k",
                value: k,
                reason: "must be positive",
            });
        }
        Ok(Self::ProportionalToStep { k })
    }

    /// Momentum weight `η_j` given the step `t_j` of the same iteration.
    pub fn weight(&self, j: usize, step: f64) -> f64 {
        match *self {
            MomentumSchedule::Zero => 0.0,
            MomentumSchedule::Constant { eta } => eta,
            MomentumSchedule::Polynomial { c, beta } => {
                let base = (j + 1) as f64;
                if beta == 1.0 {
                    c / base
                } else {
                    c / base.powf(beta)
                }
            }
            MomentumSchedule::ProportionalToStep { k } => (k * step).min(MOMENTUM_CEILING),
        }
    }

    /// Whether `weight(j, step)` hit the ceiling.
    pub fn is_clamped(&self, step: f64) -> bool {
        matches!(*self, MomentumSchedule::ProportionalToStep { k } if k * step >= MOMENTUM_CEILING)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// Breaks a hypothesis the bounds rely on; runs refuse without an override.
    Violation,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `t_j·m ∈ (0, 1]`.
    StepTimesCurvature,
    /// `η_j < 1`.
    MomentumBelowOne,
    /// `Σ t_j² < ∞`, which fails for polynomial steps with `α ≤ 1/2`.
    SquareSummableSteps,
    /// Step or momentum sequence increases somewhere.
    NonIncreasing,
    /// A step-proportional momentum weight was clamped below one.
    MomentumClamped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub condition: Condition,
    pub severity: Severity,
    /// First iteration index at which the condition fails, when index-based.
    pub first_index: Option<usize>,
    /// Number of offending indices within the horizon.
    pub count: usize,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Violation => "violation",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidityReport {
    pub findings: Vec<Finding>,
}

impl ValidityReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    /// No violations (warnings allowed).
    pub fn is_valid(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn violations(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Violation)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }

    pub fn has(&self, condition: Condition) -> bool {
        self.findings.iter().any(|f| f.condition == condition)
    }
}

#[derive(Default)]
struct Tally {
    first: Option<(usize, f64)>,
    count: usize,
}

impl Tally {
    fn hit(&mut self, j: usize, value: f64) {
        if self.first.is_none() {
            self.first = Some((j, value));
        }
        self.count += 1;
    }
}

/// Checks the step/momentum hypotheses over `j < horizon`.
///
/// `η_0` is not checked against 1: the first momentum term multiplies
/// `θ_0 − θ_{−1} = 0` and has no effect on the trajectory.
pub fn validate(step: &StepSchedule, momentum: &MomentumSchedule, m: f64, horizon: usize) -> ValidityReport {
    let mut report = ValidityReport::default();
    let mut step_cond = Tally::default();
    let mut eta_cond = Tally::default();
    let mut clamped = Tally::default();
    let mut step_monotone = Tally::default();
    let mut eta_monotone = Tally::default();
    let mut prev: Option<(f64, f64)> = None;

    let limit = step.total_length().map_or(horizon, |len| len.min(horizon));
    for j in 0..limit {
        let t = match step.step_size(j) {
            Ok(t) => t,
            Err(_) => break,
        };
        let eta = momentum.weight(j, t);
        let tm = t * m;
        if !(tm > 0.0 && tm <= 1.0) {
            step_cond.hit(j, tm);
        }
        if j > 0 && eta >= 1.0 {
            eta_cond.hit(j, eta);
        }
        if momentum.is_clamped(t) {
            clamped.hit(j, eta);
        }
        if let Some((pt, pe)) = prev {
            if t > pt {
                step_monotone.hit(j, t);
            }
            if j > 1 && eta > pe {
                eta_monotone.hit(j, eta);
            }
        }
        prev = Some((t, eta));
    }
    if horizon > limit {
        report.findings.push(Finding {
            condition: Condition::StepTimesCurvature,
            severity: Severity::Violation,
            first_index: Some(limit),
            count: horizon - limit,
            message: format!("step schedule covers only {limit} of {horizon} iterations"),
        });
    }

    if let Some((j, tm)) = step_cond.first {
        report.findings.push(Finding {
            condition: Condition::StepTimesCurvature,
            severity: Severity::Violation,
            first_index: Some(j),
            count: step_cond.count,
            message: format!(
                "t·m = {tm} ∉ (0,1] at j = {j} ({} iterations affected); step size times strong convexity must lie in (0, 1]",
                step_cond.count
            ),
        });
    }
    if let Some((j, eta)) = eta_cond.first {
        report.findings.push(Finding {
            condition: Condition::MomentumBelowOne,
            severity: Severity::Violation,
            first_index: Some(j),
            count: eta_cond.count,
            message: format!("η = {eta} at j = {j}; η < 1 required"),
        });
    }
    if let StepSchedule::Polynomial { alpha, .. } = step {
        if *alpha <= 0.5 {
            report.findings.push(Finding {
                condition: Condition::SquareSummableSteps,
                severity: Severity::Warning,
                first_index: None,
                count: 0,
                message: format!("α = {alpha} ≤ 1/2: Σt² divergent; square-summable step hypothesis not met"),
            });
        }
    }
    if let Some((j, eta)) = clamped.first {
        report.findings.push(Finding {
            condition: Condition::MomentumClamped,
            severity: Severity::Warning,
            first_index: Some(j),
            count: clamped.count,
            message: format!(
                "k·t_j ≥ 1 at j = {j}; momentum clamped to {eta} on {} iterations",
                clamped.count
            ),
        });
    }
    if let Some((j, t)) = step_monotone.first {
        report.findings.push(Finding {
            condition: Condition::NonIncreasing,
            severity: Severity::Warning,
            first_index: Some(j),
            count: step_monotone.count,
            message: format!("step size increases to {t} at j = {j}"),
        });
    }
    if let Some((j, eta)) = eta_monotone.first {
        report.findings.push(Finding {
            condition: Condition::NonIncreasing,
            severity: Severity::Warning,
            first_index: Some(j),
            count: eta_monotone.count,
            message: format!("momentum weight increases to {eta} at j = {j}"),
        });
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialSums {
    pub sum_t: f64,
    pub sum_t2: f64,
    pub sum_eta: f64,
    pub sum_eta2: f64,
}

/// Prefix sums `Σ_{j=0}^{n−1}` of `t_j`, `t_j²`, `η_j`, `η_j²`.
pub fn partial_sums(step: &StepSchedule, momentum: &MomentumSchedule, n: usize) -> Result<PartialSums, ScheduleError> {
    let mut s = PartialSums {
        sum_t: 0.0,
        sum_t2: 0.0,
        sum_eta: 0.0,
        sum_eta2: 0.0,
    };
    for j in 0..n {
        let t = step.step_size(j)?;
        let eta = momentum.weight(j, t);
        s.sum_t += t;
        s.sum_t2 += t * t;
        s.sum_eta += eta;
        s.sum_eta2 += eta * eta;
    }
    Ok(s)
}
