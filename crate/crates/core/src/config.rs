//! JSON experiment configuration: parsing with dotted overrides, resolution of
//! defaults, and construction of the runnable [`Experiment`].
//!
//! Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bounds::{
    plateau_bound_sequence, sg_recursion_bound, sgm_recursion_bound, BoundSequence, EnvelopeShape, RateEnvelope,
};
use crate::estimators::EstimatorKind;
use crate::geometry::Domain;
use crate::harness::{
    geometric_checkpoints, validate_plan, Bound, Experiment, RunSettings, StageLength, StagePlan, StartPoint,
};
use crate::optimizers::Variant;
use crate::problems::{GradientNoise, NoiseModel, Problem};
use crate::schedules::{validate, MomentumSchedule, Stage, StepSchedule, ValidityReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn invalid(path: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Quadratic {
        hessian_diag: Vec<f64>,
        theta_star: Vec<f64>,
    },
    QuadPlusL1 {
        hessian_diag: Vec<f64>,
        theta_star: Vec<f64>,
        l1_weight: f64,
    },
    /// Either `csv` (relative to the config file) or inline `design` + `targets`.
    LeastSquares {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        design: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        targets: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    Gaussian { sigma2: f64 },
    BoundedRademacher { sigma2: f64 },
    Minibatch { batch_size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StepConfig {
    Polynomial {
        gamma: f64,
        alpha: f64,
    },
    Constant {
        a: f64,
    },
    /// `[[a_1, n_1], [a_2, n_2], …]`.
    Staged(Vec<(f64, usize)>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MomentumConfig {
    #[default]
    Zero,
    Constant {
        eta: f64,
    },
    Polynomial {
        c: f64,
        beta: f64,
    },
    ProportionalToStep {
        k: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartConfig {
    Point(Vec<f64>),
    /// `"random-interior"`.
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LengthConfig {
    Count(usize),
    /// `"auto"`.
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub step: f64,
    pub length: LengthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvelopeName {
    InvN,
    LogNOverN,
    InvNBeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundConfig {
    SgRecursion,
    SgmRecursion,
    Plateau,
    /// Calibrated on the first half of the checkpoints unless `constant` is given.
    Envelope {
        shape: EnvelopeName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        constant: Option<f64>,
    },
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundConfig>,
    /// Clip recursion bounds at `L²`.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub cap: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            fit_window: None,
            bound: None,
            cap: true,
        }
    }
}

fn default_estimator() -> String {
    "last".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub domain: DomainConfig,
    pub noise: NoiseConfig,
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qhm_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<StepConfig>,
    #[serde(default)]
    pub momentum: MomentumConfig,
    #[serde(default = "default_estimator")]
    pub estimator: String,
    #[serde(default)]
    pub suffix_start: usize,
    pub theta0: StartConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub shared_stream: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<Vec<StageConfig>>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

/// Parses `text`, applies `key.path=value` overrides, and deserializes.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    from_value(value)
}

pub fn from_value(value: Value) -> Result<ExperimentConfig, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Parse {
            path: if path == "." { "config".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

/// Reads and parses a config file.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text, overrides)
}

/// Sets `a.b.c` in a JSON tree; the value is parsed as JSON, falling back to a string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::Parse {
        path: assignment.to_string(),
        message: "override must have the form key=value".into(),
    })?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Parse {
            path: key.to_string(),
            message: "empty key segment".into(),
        });
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = root;
    let segments: Vec<&str> = key.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let map = match node {
            Value::Object(map) => map,
            _ => {
                return Err(ConfigError::Parse {
                    path: segments[..i].join("."),
                    message: "is not an object; cannot set a field inside it".into(),
                })
            }
        };
        if i + 1 == segments.len() {
            map.insert(seg.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(seg.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("at least one segment")
}

/// A config turned into runnable objects.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub experiment: Experiment,
    pub stages: Option<Vec<StagePlan>>,
}

impl ExperimentConfig {
    /// Builds the problem, schedules and experiment. Relative CSV paths are
    /// taken relative to `base_dir`. `default_workers` applies when the
    /// config does not name a worker count.
    pub fn resolve(&self, base_dir: &Path, default_workers: usize) -> Result<Resolved, ConfigError> {
        let domain = self.build_domain()?;
        let problem = self.build_problem(domain, base_dir)?;
        let dim = problem.dim();

        let variant = match self.variant.parse::<Variant>() {
            Ok(Variant::Qhm { .. }) => Variant::qhm(self.qhm_v.unwrap_or(1.0)).map_err(|e| invalid("qhm_v", e))?,
            Ok(v) => {
                if self.qhm_v.is_some() {
                    return Err(invalid("qhm_v", "only meaningful with variant \"qhm\""));
                }
                v
            }
            Err(e) => return Err(invalid("variant", e)),
        };

        let momentum = self.build_momentum()?;
        let step = match &self.step {
            Some(s) => Some(build_step(s)?),
            None => None,
        };
        let stages = match &self.stages {
            Some(list) => Some(build_stages(list)?),
            None => None,
        };
        let horizon = match (self.horizon, &step) {
            (Some(h), _) => h,
            (None, Some(s)) if s.total_length().is_some() => s.total_length().unwrap_or(0),
            (None, _) if stages.is_some() => 0,
            (None, _) => {
                return Err(invalid(
                    "horizon",
                    "missing (required unless the step schedule is staged)",
                ))
            }
        };
        let step = match step {
            Some(s) => s,
            None if stages.is_some() => {
                StepSchedule::constant(stages.as_ref().expect("checked")[0].step).map_err(|e| invalid("stages", e))?
            }
            None => return Err(invalid("step", "missing")),
        };

        let estimator = match self.estimator.as_str() {
            "suffix" => EstimatorKind::SuffixAverage {
                start: self.suffix_start,
            },
            other => {
                let kind = other.parse::<EstimatorKind>().map_err(|e| invalid("estimator", e))?;
                if self.suffix_start != 0 {
                    return Err(invalid("suffix_start", "only meaningful with estimator \"suffix\""));
                }
                kind
            }
        };

        let start = match &self.theta0 {
            StartConfig::Point(p) => {
                if p.len() != dim {
                    return Err(invalid(
                        "theta0",
                        format!("has length {}, problem dimension is {dim}", p.len()),
                    ));
                }
                if !problem.domain().contains(p, 0.0) {
                    return Err(invalid("theta0", "lies outside the domain"));
                }
                StartPoint::Fixed(p.clone())
            }
            StartConfig::Named(s) if s == "random-interior" => StartPoint::RandomInterior,
            StartConfig::Named(s) => {
                return Err(invalid(
                    "theta0",
                    format!("expected a vector or \"random-interior\", got {s:?}"),
                ))
            }
        };

        let checkpoints = match &self.checkpoints {
            Some(c) => {
                if c.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(invalid("checkpoints", "must be strictly increasing"));
                }
                if c.last().is_some_and(|&l| l > horizon) {
                    return Err(invalid(
                        "checkpoints",
                        format!("last checkpoint exceeds horizon {horizon}"),
                    ));
                }
                c.clone()
            }
            None => geometric_checkpoints(horizon),
        };
        if stages.is_none() && checkpoints.is_empty() {
            return Err(invalid("checkpoints", "empty (horizon too small?)"));
        }
        if self.replicates < 2 {
            return Err(invalid("replicates", format!("{} (need at least 2)", self.replicates)));
        }
        let workers = self.workers.unwrap_or(default_workers);
        if workers == 0 {
            return Err(invalid("workers", "must be at least 1"));
        }
        if let Some((lo, hi)) = self.analysis.fit_window {
            if lo >= hi {
                return Err(invalid("analysis.fit_window", "needs lo < hi"));
            }
        }
        if let Some(BoundConfig::Envelope { shape, beta, constant }) = &self.analysis.bound {
            envelope_shape(shape, *beta)?;
            if let Some(c) = constant {
                RateEnvelope::new(EnvelopeShape::InvN, *c)
                    .map_err(|e| invalid("analysis.bound.envelope.constant", e))?;
            }
        }

        let experiment = Experiment {
            problem,
            variant,
            step,
            momentum,
            estimator,
            start,
            horizon,
            checkpoints: checkpoints.clone(),
            settings: RunSettings {
                replicates: self.replicates,
                master_seed: self.master_seed,
                workers,
                shared_stream: self.shared_stream,
            },
        };

        let mut config = self.clone();
        config.horizon = Some(horizon);
        config.workers = Some(workers);
        if stages.is_none() {
            config.checkpoints = Some(checkpoints);
        }
        if matches!(variant, Variant::Qhm { .. }) {
            config.qhm_v = Some(self.qhm_v.unwrap_or(1.0));
        }
        Ok(Resolved {
            config,
            experiment,
            stages,
        })
    }

    fn build_domain(&self) -> Result<Domain, ConfigError> {
        match &self.domain {
            DomainConfig::Ball { center, radius } => {
                Domain::ball(center.clone(), *radius).map_err(|e| invalid("domain.ball", e))
            }
            DomainConfig::Box { lower, upper } => {
                Domain::boxed(lower.clone(), upper.clone()).map_err(|e| invalid("domain.box", e))
            }
        }
    }

    fn additive_noise(&self) -> Result<NoiseModel, ConfigError> {
        match &self.noise {
            NoiseConfig::Gaussian { sigma2 } => {
                NoiseModel::gaussian(*sigma2).map_err(|e| invalid("noise.gaussian.sigma2", e))
            }
            NoiseConfig::BoundedRademacher { sigma2 } => {
                NoiseModel::bounded_rademacher(*sigma2).map_err(|e| invalid("noise.bounded_rademacher.sigma2", e))
            }
            NoiseConfig::Minibatch { .. } => Err(invalid(
                "noise.minibatch",
                "mini-batch noise is only available for least_squares problems",
            )),
        }
    }

    fn build_problem(&self, domain: Domain, base_dir: &Path) -> Result<Problem, ConfigError> {
        match &self.problem {
            ProblemConfig::Quadratic {
                hessian_diag,
                theta_star,
            } => Problem::quadratic(hessian_diag.clone(), theta_star.clone(), domain, self.additive_noise()?)
                .map_err(|e| invalid("problem.quadratic", e)),
            ProblemConfig::QuadPlusL1 {
                hessian_diag,
                theta_star,
                l1_weight,
            } => Problem::quad_plus_l1(
                hessian_diag.clone(),
                theta_star.clone(),
                *l1_weight,
                domain,
                self.additive_noise()?,
            )
            .map_err(|e| invalid("problem.quad_plus_l1", e)),
            ProblemConfig::LeastSquares { csv, design, targets } => {
                let noise = match &self.noise {
                    NoiseConfig::Minibatch { batch_size } => {
                        if *batch_size == 0 {
                            return Err(invalid("noise.minibatch.batch_size", "must be at least 1"));
                        }
                        GradientNoise::Minibatch {
                            batch_size: *batch_size,
                        }
                    }
                    _ => GradientNoise::Additive(self.additive_noise()?),
                };
                match (csv, design, targets) {
                    (Some(file), None, None) => {
                        let path: PathBuf = base_dir.join(file);
                        Problem::load_least_squares_csv(&path, domain, noise)
                            .map_err(|e| invalid("problem.least_squares.csv", e))
                    }
                    (None, Some(x), Some(y)) => Problem::least_squares(x.clone(), y.clone(), domain, noise)
                        .map_err(|e| invalid("problem.least_squares", e)),
                    _ => Err(invalid(
                        "problem.least_squares",
                        "give either csv or both design and targets",
                    )),
                }
            }
        }
    }

    fn build_momentum(&self) -> Result<MomentumSchedule, ConfigError> {
        Ok(match &self.momentum {
            MomentumConfig::Zero => MomentumSchedule::Zero,
            MomentumConfig::Constant { eta } => {
                MomentumSchedule::constant(*eta).map_err(|e| invalid("momentum.constant.eta", e))?
            }
            MomentumConfig::Polynomial { c, beta } => {
                MomentumSchedule::polynomial(*c, *beta).map_err(|e| invalid("momentum.polynomial", e))?
            }
            MomentumConfig::ProportionalToStep { k } => {
                MomentumSchedule::proportional_to_step(*k).map_err(|e| invalid("momentum.proportional_to_step.k", e))?
            }
        })
    }

    /// Hash of the resolved config with the worker count removed, so it
    /// identifies the results rather than how they were computed.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn to_pretty_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

fn build_step(s: &StepConfig) -> Result<StepSchedule, ConfigError> {
    match s {
        StepConfig::Polynomial { gamma, alpha } => StepSchedule::polynomial(*gamma, *alpha).map_err(|e| {
            let field = if matches!(e, crate::schedules::ScheduleError::Alpha(_)) {
                "alpha"
            } else {
                "gamma"
            };
            invalid(&format!("step.polynomial.{field}"), e)
        }),
        StepConfig::Constant { a } => StepSchedule::constant(*a).map_err(|e| invalid("step.constant.a", e)),
        StepConfig::Staged(list) => {
            StepSchedule::staged(list.iter().map(|&(step, length)| Stage { step, length }).collect())
                .map_err(|e| invalid("step.staged", e))
        }
    }
}

fn build_stages(list: &[StageConfig]) -> Result<Vec<StagePlan>, ConfigError> {
    if list.is_empty() {
        return Err(invalid("stages", "needs at least one stage"));
    }
    list.iter()
        .enumerate()
        .map(|(k, s)| {
            let length = match &s.length {
                LengthConfig::Count(0) => return Err(invalid(&format!("stages[{k}].length"), "must be positive")),
                LengthConfig::Count(n) => StageLength::Fixed(*n),
                LengthConfig::Named(a) if a == "auto" => StageLength::Auto { min: 0 },
                LengthConfig::Named(other) => {
                    return Err(invalid(
                        &format!("stages[{k}].length"),
                        format!("expected a count or \"auto\", got {other:?}"),
                    ))
                }
            };
            if !(s.step.is_finite() && s.step > 0.0) {
                return Err(invalid(&format!("stages[{k}].step"), "must be positive"));
            }
            Ok(StagePlan { step: s.step, length })
        })
        .collect()
}

fn envelope_shape(shape: &EnvelopeName, beta: Option<f64>) -> Result<EnvelopeShape, ConfigError> {
    match (shape, beta) {
        (EnvelopeName::InvN, None) => Ok(EnvelopeShape::InvN),
        (EnvelopeName::LogNOverN, None) => Ok(EnvelopeShape::LogNOverN),
        (EnvelopeName::InvNBeta, Some(b)) => {
            EnvelopeShape::inv_n_beta(b).map_err(|e| invalid("analysis.bound.envelope.beta", e))
        }
        (EnvelopeName::InvNBeta, None) => Err(invalid("analysis.bound.envelope.beta", "required for inv_n_beta")),
        (_, Some(_)) => Err(invalid(
            "analysis.bound.envelope.beta",
            "only meaningful for inv_n_beta",
        )),
    }
}

/// The comparison bound requested under `analysis.bound`, evaluated for this experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisBound {
    Sequence(BoundSequence),
    Envelope(RateEnvelope),
    Uncalibrated(EnvelopeShape),
}

impl AnalysisBound {
    pub fn as_bound(&self) -> Bound<'_> {
        match self {
            AnalysisBound::Sequence(s) => Bound::Sequence(s),
            AnalysisBound::Envelope(e) => Bound::Envelope(*e),
            AnalysisBound::Uncalibrated(s) => Bound::Uncalibrated(*s),
        }
    }
}

impl Resolved {
    /// `E_0` for the recursion bounds: exact for a fixed start, the farthest
    /// squared distance from `θ*` over the domain for a random one.
    pub fn initial_error(&self) -> f64 {
        let p = &self.experiment.problem;
        match &self.experiment.start {
            StartPoint::Fixed(t) => crate::vector::dist_sq(t, p.theta_star()),
            StartPoint::RandomInterior => {
                let far = p.domain().farthest_distance(p.theta_star()).unwrap_or(f64::INFINITY);
                far * far
            }
        }
    }

    /// Evaluates `analysis.bound` for this experiment, if one is set.
    pub fn analysis_bound(&self) -> Result<Option<AnalysisBound>, ConfigError> {
        let Some(bound) = &self.config.analysis.bound else {
            return Ok(None);
        };
        let exp = &self.experiment;
        let c = exp.problem.constants();
        let cap = self.config.analysis.cap.then_some(c.diameter * c.diameter);
        let path = "analysis.bound";
        Ok(Some(match bound {
            BoundConfig::SgRecursion => AnalysisBound::Sequence(
                sg_recursion_bound(self.initial_error(), &exp.step, c, exp.horizon, cap)
                    .map_err(|e| invalid(path, e))?,
            ),
            BoundConfig::SgmRecursion => AnalysisBound::Sequence(
                sgm_recursion_bound(self.initial_error(), &exp.step, &exp.momentum, c, exp.horizon, cap)
                    .map_err(|e| invalid(path, e))?,
            ),
            BoundConfig::Plateau => {
                let StepSchedule::Constant { step } = exp.step else {
                    return Err(invalid(path, "the plateau bound needs a constant step schedule"));
                };
                AnalysisBound::Sequence(plateau_bound_sequence(step, c, exp.horizon).map_err(|e| invalid(path, e))?)
            }
            BoundConfig::Envelope { shape, beta, constant } => {
                let shape = envelope_shape(shape, *beta)?;
                match constant {
                    Some(k) => AnalysisBound::Envelope(RateEnvelope::new(shape, *k).map_err(|e| invalid(path, e))?),
                    None => AnalysisBound::Uncalibrated(shape),
                }
            }
        }))
    }

    /// Schedule hypotheses over the horizon, or per stage for multistage configs.
    pub fn validity(&self) -> Result<Vec<ValidityReport>, ConfigError> {
        let exp = &self.experiment;
        match &self.stages {
            Some(plan) => validate_plan(exp, plan).map_err(|e| invalid("stages", e)),
            None => Ok(vec![validate(
                &exp.step,
                &exp.momentum,
                exp.problem.constants().strong_convexity,
                exp.horizon,
            )]),
        }
    }
}

/// Ready-to-run experiment configs.
pub mod templates {
    use super::*;

    /// `(name, alternate name, description)`.
    pub const TEMPLATES: &[(&str, &str, &str)] = &[
        (
            "sg-harmonic",
            "lemma1",
            "SG with t_j = 1/(m(j+1)); rate fit over [1e3, 1e5]",
        ),
        ("summable-momentum", "theorem1-i", "SGM with eta_j = 0.9/(j+1)^2"),
        (
            "harmonic-momentum",
            "theorem1-ii",
            "SGM with eta_j = 1/(j+1) against log(N+1)/(N+1)",
        ),
        (
            "sqrt-momentum",
            "theorem1-iii",
            "SGM with eta_j = 1/(j+1)^(1/2) against 1/((1-b)(N+1)^b)",
        ),
        (
            "plateau",
            "plateau",
            "SG with constant a = 0.1/m, last iterate, plateau bound",
        ),
        (
            "stage-momentum",
            "theorem2",
            "SGM with a = 0.1/m, eta_j = 0.9/(j+1)^(1/2), suffix average",
        ),
        (
            "constant-and-drop",
            "corollary1",
            "four stages halving a and doubling n, momentum restarted",
        ),
    ];

    pub fn names() -> Vec<&'static str> {
        TEMPLATES
            .iter()
            .flat_map(|(a, b, _)| [*a, *b])
            .filter(|n| !n.is_empty())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// The shared test problem: `½((θ₁−0.5)² + 2(θ₂+0.3)²)` on the radius-2 ball with Gaussian noise `σ² = 1`.
    pub fn base() -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemConfig::Quadratic {
                hessian_diag: vec![1.0, 2.0],
                theta_star: vec![0.5, -0.3],
            },
            domain: DomainConfig::Ball {
                center: vec![0.0, 0.0],
                radius: 2.0,
            },
            noise: NoiseConfig::Gaussian { sigma2: 1.0 },
            variant: "sg".into(),
            qhm_v: None,
            step: Some(StepConfig::Polynomial { gamma: 1.0, alpha: 1.0 }),
            momentum: MomentumConfig::Zero,
            estimator: "last".into(),
            suffix_start: 0,
            theta0: StartConfig::Point(vec![-1.5, 1.2]),
            horizon: Some(100_000),
            checkpoints: None,
            replicates: 2000,
            master_seed: 20_240_601,
            workers: None,
            shared_stream: false,
            stages: None,
            analysis: AnalysisConfig {
                fit_window: Some((1_000, 100_000)),
                bound: None,
                cap: true,
            },
        }
    }

    pub fn template(name: &str) -> Option<ExperimentConfig> {
        let canonical = TEMPLATES.iter().find(|(a, b, _)| *a == name || *b == name)?.0;
        let mut c = base();
        match canonical {
            "sg-harmonic" => {
                c.analysis.bound = Some(BoundConfig::Envelope {
                    shape: EnvelopeName::InvN,
                    beta: None,
                    constant: None,
                });
            }
            "summable-momentum" => {
                c.variant = "sgm".into();
                c.momentum = MomentumConfig::Polynomial { c: 0.9, beta: 2.0 };
                c.analysis.bound = Some(BoundConfig::Envelope {
                    shape: EnvelopeName::InvN,
                    beta: None,
                    constant: None,
                });
            }
            "harmonic-momentum" => {
                c.variant = "sgm".into();
                c.momentum = MomentumConfig::Polynomial { c: 1.0, beta: 1.0 };
                c.analysis.bound = Some(BoundConfig::Envelope {
                    shape: EnvelopeName::LogNOverN,
                    beta: None,
                    constant: None,
                });
            }
            "sqrt-momentum" => {
                c.variant = "sgm".into();
                c.momentum = MomentumConfig::Polynomial { c: 1.0, beta: 0.5 };
                c.analysis.bound = Some(BoundConfig::Envelope {
                    shape: EnvelopeName::InvNBeta,
                    beta: Some(0.5),
                    constant: None,
                });
            }
            "plateau" => {
                c.step = Some(StepConfig::Constant { a: 0.1 });
                c.horizon = Some(20_000);
                c.analysis.fit_window = None;
                c.analysis.bound = Some(BoundConfig::Plateau);
            }
            "stage-momentum" => {
                c.variant = "sgm".into();
                c.step = Some(StepConfig::Constant { a: 0.1 });
                c.momentum = MomentumConfig::Polynomial { c: 0.9, beta: 0.5 };
                c.estimator = "suffix".into();
                c.horizon = Some(20_000);
                c.analysis.fit_window = None;
                c.analysis.bound = Some(BoundConfig::Plateau);
            }
            "constant-and-drop" => {
                c.variant = "sgm".into();
                c.step = None;
                c.horizon = None;
                c.momentum = MomentumConfig::Polynomial { c: 0.9, beta: 0.5 };
                c.estimator = "suffix".into();
                c.analysis.fit_window = None;
                c.stages = Some(
                    [(0.1, 1000), (0.05, 2000), (0.025, 4000), (0.0125, 8000)]
                        .iter()
                        .map(|&(step, n)| StageConfig {
                            step,
                            length: LengthConfig::Count(n),
                        })
                        .collect(),
                );
            }
            _ => unreachable!("every template is handled"),
        }
        Some(c)
    }
}

#[cfg(test)]
mod tests {
    use super::templates::*;
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "problem": {"quadratic": {"hessian_diag": [1.0], "theta_star": [0.0]}},
            "domain": {"ball": {"center": [0.0], "radius": 2.0}},
            "noise": {"gaussian": {"sigma2": 1.0}},
            "variant": "sg",
            "step": {"polynomial": {"gamma": 1.0, "alpha": 1.0}},
            "theta0": [1.0],
            "horizon": 100,
            "replicates": 4,
            "master_seed": 7
        }"#
    }

    fn resolve(text: &str, overrides: &[&str]) -> Result<Resolved, ConfigError> {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        parse_config(text, &o)?.resolve(Path::new("."), 1)
    }

    #[test]
    fn minimal_config_resolves() {
        let r = resolve(minimal(), &[]).unwrap();
        assert_eq!(r.experiment.horizon, 100);
        assert_eq!(r.experiment.checkpoints, geometric_checkpoints(100));
        assert_eq!(r.experiment.momentum, MomentumSchedule::Zero);
        assert!(r.validity().unwrap()[0].is_empty());
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let text = minimal().replace("\"alpha\": 1.0", "\"alpha\": 1.0, \"alhpa\": 2");
        let err = parse_config(&text, &[]).unwrap_err();
        assert!(err.to_string().contains("step.polynomial"), "{err}");
        let text = minimal().replace("\"variant\"", "\"varaint\": 1, \"variant\"");
        assert!(parse_config(&text, &[]).is_err());
    }

    #[test]
    fn bad_alpha_cites_range() {
        let err = resolve(minimal(), &["step.polynomial.alpha=1.5"]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("step.polynomial.alpha"), "{msg}");
        assert!(msg.contains("α ∈ (0,1]"), "{msg}");
    }

    #[test]
    fn overrides_set_nested_values() {
        let r = resolve(
            minimal(),
            &[
                "master_seed=99",
                "momentum={\"constant\": {\"eta\": 0.5}}",
                "variant=sgm",
            ],
        )
        .unwrap();
        assert_eq!(r.experiment.settings.master_seed, 99);
        assert_eq!(r.experiment.momentum, MomentumSchedule::Constant { eta: 0.5 });
        assert!(parse_config(minimal(), &["nokey".into()]).is_err());
        assert!(parse_config(minimal(), &["variant.x=1".into()]).is_err());
    }

    #[test]
    fn validation_reports_step_condition() {
        let r = resolve(minimal(), &["step={\"constant\": {\"a\": 2.0}}"]).unwrap();
        let v = &r.validity().unwrap()[0];
        assert!(!v.is_valid());
        assert!(v.violations().any(|f| f.message.contains("t·m = 2 ∉ (0,1]")));
    }

    #[test]
    fn resolved_config_round_trips() {
        let r = resolve(minimal(), &[]).unwrap();
        let text = r.config.to_pretty_json();
        let again = parse_config(&text, &[]).unwrap().resolve(Path::new("."), 1).unwrap();
        assert_eq!(again.config, r.config);
        assert_eq!(again.config.hash(), r.config.hash());
        let mut other = r.config.clone();
        other.workers = Some(8);
        assert_eq!(other.hash(), r.config.hash());
        other.master_seed += 1;
        assert_ne!(other.hash(), r.config.hash());
    }

    #[test]
    fn theta0_checks() {
        assert!(resolve(minimal(), &["theta0=[5.0]"]).is_err());
        assert!(resolve(minimal(), &["theta0=[0.0, 0.0]"]).is_err());
        assert!(resolve(minimal(), &["theta0=\"somewhere\""]).is_err());
        let r = resolve(minimal(), &["theta0=random-interior"]).unwrap();
        assert_eq!(r.experiment.start, StartPoint::RandomInterior);
        assert!((r.initial_error() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn every_template_resolves_and_validates() {
        for (name, alt, _) in TEMPLATES {
            for n in [name, alt] {
                let c = template(n).unwrap_or_else(|| panic!("{n}"));
                let r = c.resolve(Path::new("."), 1).unwrap_or_else(|e| panic!("{n}: {e}"));
                for report in r.validity().unwrap() {
                    assert!(report.is_valid(), "{n}: {:?}", report.findings);
                }
                if r.stages.is_none() {
                    r.analysis_bound().unwrap();
                }
            }
        }
        assert!(template("nope").is_none());
    }

    #[test]
    fn harmonic_momentum_template_matches_description() {
        let c = template("theorem1-ii").unwrap();
        assert_eq!(c.step, Some(StepConfig::Polynomial { gamma: 1.0, alpha: 1.0 }));
        assert_eq!(c.momentum, MomentumConfig::Polynomial { c: 1.0, beta: 1.0 });
        let p = template("plateau").unwrap();
        assert_eq!(p.step, Some(StepConfig::Constant { a: 0.1 }));
        assert_eq!(p.momentum, MomentumConfig::Zero);
        assert_eq!(p.estimator, "last");
    }

    #[test]
    fn stages_parse() {
        let c = template("corollary1").unwrap();
        let r = c.resolve(Path::new("."), 1).unwrap();
        assert_eq!(r.stages.as_ref().unwrap().len(), 4);
        let text = minimal().replace(
            "\"replicates\"",
            "\"stages\": [{\"step\": 0.1, \"length\": \"auto\"}, {\"step\": 0.05, \"length\": 10}], \"replicates\"",
        );
        let r = resolve(&text, &[]).unwrap();
        assert_eq!(r.stages.unwrap()[0].length, StageLength::Auto { min: 0 });
        let bad = text.replace("\"auto\"", "\"soon\"");
        assert!(resolve(&bad, &[]).is_err());
    }

    #[test]
    fn least_squares_inline_and_minibatch() {
        let text = r#"{
            "problem": {"least_squares": {"design": [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], "targets": [0.1, 0.2, 0.3]}},
            "domain": {"box": {"lower": [-1.0, -1.0], "upper": [1.0, 1.0]}},
            "noise": {"minibatch": {"batch_size": 2}},
            "variant": "qhm",
            "step": {"constant": {"a": 0.1}},
            "momentum": {"constant": {"eta": 0.5}},
            "theta0": "random-interior",
            "horizon": 50,
            "replicates": 2,
            "master_seed": 1
        }"#;
        let r = resolve(text, &[]).unwrap();
        assert_eq!(r.experiment.variant, Variant::Qhm { v: 1.0 });
        assert_eq!(r.config.qhm_v, Some(1.0));
        let quad_minibatch = minimal().replace(
            "{\"gaussian\": {\"sigma2\": 1.0}}",
            "{\"minibatch\": {\"batch_size\": 2}}",
        );
        assert!(resolve(&quad_minibatch, &[]).is_err());
    }
}
