use serde::Serialize;

use super::{parallel_map, Experiment, ExperimentError, ReplicateErrors};
use crate::bounds::{constant_step_plateau, stage_burn_in};
use crate::estimators::{EstimatorKind, RunningEstimator};
use crate::optimizers::{IterateState, StepParams};
use crate::schedules::{validate, StepSchedule, ValidityReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageLength {
    Fixed(usize),
    /// `max(min, N_a)` with the burn-in computed from `E_1 = L²`.
    Auto {
        min: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StagePlan {
    pub step: f64,
    pub length: StageLength,
}

/// `stages` stages starting at `(a0, n0)`, halving the step and doubling the length each time.
pub fn halving_plan(a0: f64, n0: StageLength, stages: usize) -> Vec<StagePlan> {
    (0..stages)
        .map(|k| {
            let scale = 1usize << k;
            StagePlan {
                step: a0 / scale as f64,
                length: match n0 {
                    StageLength::Fixed(n) => StageLength::Fixed(n * scale),
                    StageLength::Auto { min } => StageLength::Auto { min: min * scale },
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: usize,
    pub step: f64,
    pub length: usize,
    pub burn_in: usize,
    /// MSE of the stage's suffix average at the end of the stage.
    pub mse_mean: f64,
    pub mse_sem: f64,
    pub plateau: f64,
}

impl StageReport {
    pub fn within_plateau(&self) -> bool {
        self.mse_mean <= self.plateau + super::dominance::SEM_MARGIN * self.mse_sem
    }
}

struct ResolvedStage {
    step: f64,
    length: usize,
    burn_in: usize,
    plateau: f64,
}

fn resolve(experiment: &Experiment, plan: &[StagePlan]) -> Result<Vec<ResolvedStage>, ExperimentError> {
    if plan.is_empty() {
        return Err(ExperimentError::Invalid("no stages".into()));
    }
    if plan.windows(2).any(|w| w[1].step >= w[0].step) {
        return Err(ExperimentError::Invalid(
            "stage step sizes must be strictly decreasing".into(),
        ));
    }
    let c = experiment.problem.constants();
    let m = c.strong_convexity;
    let l2 = c.diameter * c.diameter;
    plan.iter()
        .map(|s| {
            let plateau = constant_step_plateau(s.step, m, c.grad_bound_sq, c.noise_variance)?;
            let burn_in = stage_burn_in(s.step, m, l2, c.grad_bound_sq, c.noise_variance)?;
            let length = match s.length {
                StageLength::Fixed(n) => n,
                StageLength::Auto { min } => min.max(burn_in),
            };
            if length == 0 {
                return Err(ExperimentError::Invalid("stage length must be positive".into()));
            }
            Ok(ResolvedStage {
                step: s.step,
                length,
                burn_in,
                plateau,
            })
        })
        .collect()
}

/// Step/momentum hypotheses checked stage by stage with the momentum index restarted.
pub fn validate_plan(experiment: &Experiment, plan: &[StagePlan]) -> Result<Vec<ValidityReport>, ExperimentError> {
    let m = experiment.problem.constants().strong_convexity;
    resolve(experiment, plan)?
        .iter()
        .map(|s| {
            Ok(validate(
                &StepSchedule::constant(s.step)?,
                &experiment.momentum,
                m,
                s.length,
            ))
        })
        .collect()
}

/// Constant-and-drop: every replicate runs the stages back to back. Each
/// stage restarts the momentum history at the previous stage's final iterate
/// and averages its own iterates `θ_0, …, θ_{n_k}`.
///
/// Uses the problem, variant, momentum, start point and run settings of
/// `experiment`; its step schedule, horizon, checkpoints and estimator are ignored.
pub fn run_multistage(experiment: &Experiment, plan: &[StagePlan]) -> Result<Vec<StageReport>, ExperimentError> {
    let stages = resolve(experiment, plan)?;
    let settings = &experiment.settings;
    if settings.replicates < 2 {
        return Err(ExperimentError::Invalid("need at least 2 replicates".into()));
    }
    let domain = experiment.problem.domain();
    let target = experiment.problem.theta_star();

    let per_replicate = parallel_map(settings.workers, 0..settings.replicates, |r| {
        let mut rng = settings.stream(r);
        let theta0 = experiment.start_point(&mut rng);
        let mut offset = 0usize;
        let numeric = |step: usize, message: String| ExperimentError::Numeric {
            replicate: r,
            step,
            message,
        };
        let mut state =
            IterateState::init(&theta0, experiment.variant, domain).map_err(|e| numeric(0, e.to_string()))?;
        let mut estimator = RunningEstimator::new(EstimatorKind::SuffixAverage { start: 0 }, theta0.len());
        let mut g = vec![0.0; theta0.len()];
        let mut errors = Vec::with_capacity(stages.len());
        for stage in &stages {
            state.restart();
            estimator.reset();
            estimator
                .observe(state.theta(), 0)
                .map_err(|e| numeric(offset, e.to_string()))?;
            for j in 0..stage.length {
                let eta = experiment.momentum.weight(j, stage.step);
                experiment.problem.gradient_sample_into(state.theta(), &mut rng, &mut g);
                state
                    .step(&g, StepParams::new(stage.step, eta), domain)
                    .map_err(|e| numeric(offset + j, e.to_string()))?;
                estimator
                    .observe(state.theta(), j + 1)
                    .map_err(|e| numeric(offset + j + 1, e.to_string()))?;
            }
            offset += stage.length;
            errors.push(
                estimator
                    .squared_error(target)
                    .map_err(|e| numeric(offset, e.to_string()))?,
            );
        }
        Ok(errors)
    })?;

    let ends: Vec<usize> = stages
        .iter()
        .scan(0, |acc, s| {
            *acc += s.length;
            Some(*acc)
        })
        .collect();
    let summary = ReplicateErrors {
        checkpoints: ends,
        rows: per_replicate.into_iter().enumerate().collect(),
    }
    .aggregate(EstimatorKind::SuffixAverage { start: 0 })?;

    Ok(stages
        .iter()
        .zip(&summary.rows)
        .enumerate()
        .map(|(k, (s, row))| StageReport {
            stage: k,
            step: s.step,
            length: s.length,
            burn_in: s.burn_in,
            mse_mean: row.mse_mean,
            mse_sem: row.mse_sem,
            plateau: s.plateau,
        })
        .collect())
}
