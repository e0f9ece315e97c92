//! Monte Carlo experiment engine.
//!
//! Each replicate owns its trajectory and a random stream seeded from
//! `(master_seed, replicate)`. Replicates run on a bounded worker pool and are
//! aggregated in replicate-index order, so the output never depends on the
//! worker count.

mod dominance;
mod fit;
mod multistage;
mod summary;

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

pub use dominance::{dominance_check, Bound, CheckpointVerdict, DominanceReport};
pub use fit::{fit_rate, FitError, RateFit};
pub use multistage::{halving_plan, run_multistage, validate_plan, StageLength, StagePlan, StageReport};
pub use summary::{CheckpointStat, RunMetadata, RunSummary, SummaryError};

use crate::bounds::BoundsError;
use crate::estimators::{EstimatorError, EstimatorKind, RunningEstimator};
use crate::optimizers::{IterateState, OptimizerError, StepParams, Variant};
use crate::problems::Problem;
use crate::rng::RandomStream;
use crate::schedules::{MomentumSchedule, ScheduleError, StepSchedule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("replicate {replicate} failed at step {step}: {message}")]
    Numeric {
        replicate: usize,
        step: usize,
        message: String,
    },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("cannot merge replicate sets: {0}")]
    Merge(String),
}

/// Where every trajectory starts.
#[derive(Debug, Clone, PartialEq)]
pub enum StartPoint {
    Fixed(Vec<f64>),
    /// Drawn uniformly from the domain with the replicate's own stream.
    RandomInterior,
}

/// Replication and scheduling knobs shared by single runs and multistage runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub replicates: usize,
    pub master_seed: u64,
    pub workers: usize,
    /// Debug mode: every replicate reuses replicate 0's stream.
    pub shared_stream: bool,
}

impl RunSettings {
    pub fn new(replicates: usize, master_seed: u64) -> Self {
        Self {
            replicates,
            master_seed,
            workers: 1,
            shared_stream: false,
        }
    }

    fn stream(&self, replicate: usize) -> RandomStream {
        let r = if self.shared_stream { 0 } else { replicate };
        RandomStream::for_replicate(self.master_seed, r as u64)
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub problem: Problem,
    pub variant: Variant,
    /// `t_j`, or `α_j` for the EMA variants.
    pub step: StepSchedule,
    /// `η_j`, or `β_j` for the EMA variants.
    pub momentum: MomentumSchedule,
    pub estimator: EstimatorKind,
    pub start: StartPoint,
    pub horizon: usize,
    pub checkpoints: Vec<usize>,
    pub settings: RunSettings,
}

/// `{⌈1.3^i⌉ : i ≥ 0} ∩ [1, N]`, deduplicated and increasing.
pub fn geometric_checkpoints(horizon: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut x = 1.0f64;
    while x.ceil() <= horizon as f64 {
        let c = x.ceil() as usize;
        if out.last() != Some(&c) {
            out.push(c);
        }
        x *= 1.3;
    }
    out
}

impl Experiment {
    /// Checks the structural invariants; schedule hypotheses are left to
    /// [`crate::schedules::validate`].
    pub fn check(&self) -> Result<(), ExperimentError> {
        if self.settings.replicates < 2 {
            return Err(ExperimentError::Invalid(format!(
                "replicates = {} (need at least 2)",
                self.settings.replicates
            )));
        }
        if self.settings.workers == 0 {
            return Err(ExperimentError::Invalid("workers must be at least 1".into()));
        }
        check_checkpoints(&self.checkpoints, self.horizon)?;
        if let Some(total) = self.step.total_length() {
            if total < self.horizon {
                return Err(ScheduleError::Exhausted { index: total, total }.into());
            }
        }
        if let StartPoint::Fixed(theta0) = &self.start {
            if !self.problem.domain().contains(theta0, 0.0) {
                return Err(ExperimentError::Invalid("theta0 must lie in the domain".into()));
            }
        }
        Ok(())
    }

    fn start_point(&self, rng: &mut RandomStream) -> Vec<f64> {
        match &self.start {
            StartPoint::Fixed(v) => v.clone(),
            StartPoint::RandomInterior => self.problem.domain().sample_uniform(rng),
        }
    }

    /// Squared estimator error at each checkpoint for one replicate.
    pub fn run_trajectory(&self, replicate: usize) -> Result<Vec<f64>, ExperimentError> {
        let mut rng = self.settings.stream(replicate);
        let theta0 = self.start_point(&mut rng);
        let numeric = |step: usize, message: String| ExperimentError::Numeric {
            replicate,
            step,
            message,
        };
        let domain = self.problem.domain();
        let target = self.problem.theta_star();
        let mut state = IterateState::init(&theta0, self.variant, domain).map_err(|e| numeric(0, e.to_string()))?;
        let mut estimator = RunningEstimator::new(self.estimator, theta0.len());
        let mut out = Vec::with_capacity(self.checkpoints.len());
        let mut pending = self.checkpoints.iter().copied().peekable();

        let record = |estimator: &RunningEstimator, j: usize| -> Result<f64, ExperimentError> {
            estimator.squared_error(target).map_err(|e| match e {
                EstimatorError::Empty => {
                    ExperimentError::Invalid(format!("checkpoint {j} precedes the estimator's first observation"))
                }
                other => numeric(j, other.to_string()),
            })
        };

        estimator
            .observe(state.theta(), 0)
            .map_err(|e| numeric(0, e.to_string()))?;
        if pending.peek() == Some(&0) {
            out.push(record(&estimator, 0)?);
            pending.next();
        }
        let mut g = vec![0.0; theta0.len()];
        for j in 0..self.horizon {
            let Some(&next) = pending.peek() else { break };
            let t = self.step.step_size(j)?;
            let eta = self.momentum.weight(j, t);
            self.problem.gradient_sample_into(state.theta(), &mut rng, &mut g);
            state
                .step(&g, StepParams::new(t, eta), domain)
                .map_err(|e: OptimizerError| numeric(j, e.to_string()))?;
            estimator
                .observe(state.theta(), j + 1)
                .map_err(|e| numeric(j + 1, e.to_string()))?;
            if next == j + 1 {
                out.push(record(&estimator, j + 1)?);
                pending.next();
            }
        }
        Ok(out)
    }
}

fn check_checkpoints(checkpoints: &[usize], horizon: usize) -> Result<(), ExperimentError> {
    if checkpoints.is_empty() {
        return Err(ExperimentError::Invalid("no checkpoints".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Invalid(
            "checkpoints must be strictly increasing".into(),
        ));
    }
    let last = *checkpoints.last().expect("non-empty");
    if last > horizon {
        return Err(ExperimentError::Invalid(format!(
            "last checkpoint {last} exceeds horizon {horizon}"
        )));
    }
    Ok(())
}

/// Runs `f` for every replicate in `range` on a pool of `workers` threads and
/// returns the results in index order; the lowest-index error wins.
pub(crate) fn parallel_map<T, F>(workers: usize, range: std::ops::Range<usize>, f: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(usize) -> Result<T, ExperimentError> + Sync,
{
    let results: Vec<Result<T, ExperimentError>> = if workers <= 1 {
        range.map(&f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| ExperimentError::Invalid(format!("worker pool: {e}")))?;
        pool.install(|| range.into_par_iter().map(&f).collect())
    };
    results.into_iter().collect()
}

/// Per-replicate squared errors for a contiguous or merged set of replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateErrors {
    pub checkpoints: Vec<usize>,
    /// `(replicate index, squared error per checkpoint)`, sorted by index.
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl ReplicateErrors {
    /// Combines two disjoint replicate sets of the same experiment.
    pub fn merge(mut self, other: ReplicateErrors) -> Result<ReplicateErrors, ExperimentError> {
        if self.checkpoints != other.checkpoints {
            return Err(ExperimentError::Merge("checkpoint grids differ".into()));
        }
        self.rows.extend(other.rows);
        self.rows.sort_by_key(|(r, _)| *r);
        if self.rows.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(ExperimentError::Merge("replicate ranges overlap".into()));
        }
        Ok(self)
    }

    /// Mean and standard error at each checkpoint, summed in replicate order.
    pub fn aggregate(&self, estimator: EstimatorKind) -> Result<RunSummary, ExperimentError> {
        let r = self.rows.len();
        if r < 2 {
            return Err(ExperimentError::Invalid(format!(
                "{r} replicate(s); need at least 2 for a standard error"
            )));
        }
        let n = r as f64;
        let rows = self
            .checkpoints
            .iter()
            .enumerate()
            .map(|(k, &checkpoint)| {
                let mean = self.rows.iter().map(|(_, e)| e[k]).sum::<f64>() / n;
                let ss: f64 = self
                    .rows
                    .iter()
                    .map(|(_, e)| {
                        let d = e[k] - mean;
                        d * d
                    })
                    .sum();
                let sem = (ss / (n - 1.0)).sqrt() / n.sqrt();
                CheckpointStat {
                    checkpoint,
                    mse_mean: mean,
                    mse_sem: sem,
                }
            })
            .collect();
        Ok(RunSummary {
            estimator: Some(estimator),
            rows,
            metadata: RunMetadata {
                replicates: r,
                ..RunMetadata::default()
            },
        })
    }
}

/// Runs replicates `range` only; merge several ranges to split a large job.
pub fn run_replicate_range(
    experiment: &Experiment,
    range: std::ops::Range<usize>,
) -> Result<ReplicateErrors, ExperimentError> {
    check_checkpoints(&experiment.checkpoints, experiment.horizon)?;
    let start = range.start;
    let errors = parallel_map(experiment.settings.workers, range, |r| experiment.run_trajectory(r))?;
    Ok(ReplicateErrors {
        checkpoints: experiment.checkpoints.clone(),
        rows: errors.into_iter().enumerate().map(|(i, e)| (start + i, e)).collect(),
    })
}

/// All `R` replicates, aggregated.
pub fn run_replicates(experiment: &Experiment) -> Result<RunSummary, ExperimentError> {
    experiment.check()?;
    let started = Instant::now();
    let errors = run_replicate_range(experiment, 0..experiment.settings.replicates)?;
    let mut summary = errors.aggregate(experiment.estimator)?;
    summary.metadata.master_seed = experiment.settings.master_seed;
    summary.metadata.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::problems::NoiseModel;

    pub(super) fn quadratic_1d(sigma2: f64) -> Problem {
        Problem::quadratic(
            vec![1.0],
            vec![0.0],
            Domain::ball(vec![0.0], 2.0).unwrap(),
            NoiseModel::gaussian(sigma2).unwrap(),
        )
        .unwrap()
    }

    pub(super) fn experiment(problem: Problem, step: StepSchedule, horizon: usize, replicates: usize) -> Experiment {
        Experiment {
            problem,
            variant: Variant::Sg,
            step,
            momentum: MomentumSchedule::Zero,
            estimator: EstimatorKind::Last,
            start: StartPoint::Fixed(vec![1.5]),
            horizon,
            checkpoints: geometric_checkpoints(horizon),
            settings: RunSettings::new(replicates, 11),
        }
    }

    #[test]
    fn geometric_grid() {
        assert_eq!(geometric_checkpoints(10), vec![1, 2, 3, 4, 5, 7, 9]);
        assert_eq!(geometric_checkpoints(0), Vec::<usize>::new());
        let g = geometric_checkpoints(100_000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(*g.last().unwrap() <= 100_000);
    }

    #[test]
    fn noiseless_runs_have_zero_sem() {
        let exp = experiment(quadratic_1d(0.0), StepSchedule::polynomial(1.0, 1.0).unwrap(), 200, 4);
        let s = run_replicates(&exp).unwrap();
        assert!(s.rows.iter().all(|r| r.mse_sem == 0.0));
    }

    #[test]
    fn shared_stream_gives_zero_sem() {
        let mut exp = experiment(quadratic_1d(1.0), StepSchedule::constant(0.1).unwrap(), 100, 2);
        exp.settings.shared_stream = true;
        let s = run_replicates(&exp).unwrap();
        assert!(s.rows.iter().all(|r| r.mse_sem == 0.0));
        assert!(s.rows.last().unwrap().mse_mean > 0.0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut exp = experiment(quadratic_1d(1.0), StepSchedule::constant(0.1).unwrap(), 300, 16);
        let one = run_replicates(&exp).unwrap();
        exp.settings.workers = 3;
        let three = run_replicates(&exp).unwrap();
        assert_eq!(one.rows, three.rows);
    }

    #[test]
    fn split_ranges_merge_exactly() {
        let exp = experiment(quadratic_1d(1.0), StepSchedule::constant(0.1).unwrap(), 300, 10);
        let whole = run_replicate_range(&exp, 0..10).unwrap();
        let merged = run_replicate_range(&exp, 6..10)
            .unwrap()
            .merge(run_replicate_range(&exp, 0..6).unwrap())
            .unwrap();
        assert_eq!(whole, merged);
        let a = whole.aggregate(EstimatorKind::Last).unwrap();
        let b = merged.aggregate(EstimatorKind::Last).unwrap();
        assert_eq!(a.rows, b.rows);
        let overlap = run_replicate_range(&exp, 0..3)
            .unwrap()
            .merge(run_replicate_range(&exp, 2..4).unwrap());
        assert!(overlap.is_err());
    }

    #[test]
    fn noiseless_contraction_is_monotone_per_trajectory() {
        let mut exp = experiment(quadratic_1d(0.0), StepSchedule::constant(0.3).unwrap(), 60, 2);
        exp.checkpoints = (0..=60).collect();
        exp.start = StartPoint::RandomInterior;
        for r in 0..5 {
            let e = exp.run_trajectory(r).unwrap();
            assert!(e.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn structural_checks() {
        let mut exp = experiment(quadratic_1d(1.0), StepSchedule::constant(0.1).unwrap(), 10, 1);
        assert!(matches!(exp.check(), Err(ExperimentError::Invalid(_))));
        exp.settings.replicates = 2;
        exp.checkpoints = vec![3, 3];
        assert!(exp.check().is_err());
        exp.checkpoints = vec![3, 11];
        assert!(exp.check().is_err());
        exp.checkpoints = vec![0, 10];
        exp.start = StartPoint::Fixed(vec![5.0]);
        assert!(exp.check().is_err());
    }

    #[test]
    fn sem_halves_when_replicates_quadruple() {
        let small = experiment(quadratic_1d(1.0), StepSchedule::constant(0.1).unwrap(), 100, 500);
        let mut large = small.clone();
        large.settings.replicates = 2000;
        let s = run_replicates(&small).unwrap();
        let l = run_replicates(&large).unwrap();
        let ratio = s.rows.last().unwrap().mse_sem / l.rows.last().unwrap().mse_sem;
        assert!((ratio - 2.0).abs() <= 0.4, "{ratio}");
    }
}
