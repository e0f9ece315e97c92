//! Closed-form mean-squared-error bounds, their one-step recursions, and the
//! rate envelopes for diminishing step sizes.
//!
//! All bounds are stated for `E_j = E‖θ_j − θ*‖²` in terms of the problem
//! constants `m`, `M`, `σ²`, `L` (see [`ProblemConstants`]).

use serde::Serialize;
use thiserror::Error;

use crate::problems::ProblemConstants;
use crate::schedules::{MomentumSchedule, ScheduleError, StepSchedule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("t·m = {product} ∉ (0,1] at j = {index}")]
    StepCondition { index: usize, product: f64 },
    #[error("η = {value} at j = {index}; η < 1 required")]
    MomentumCondition { index: usize, value: f64 },
    #[error("constant step a = {a} must satisfy 0 < a < 1/m = {limit}")]
    StepOutOfRange { a: f64, limit: f64 },
    #[error("beta = {0} must lie in (0, 1)")]
    Beta(f64),
    #[error("horizon N = {n} is below the calibration burn-in {burn_in}")]
    BeforeBurnIn { n: usize, burn_in: usize },
    #[error("invalid argument {name} = {value}")]
    Invalid { name: &'static str, value: f64 },
    #[error("burn-in scan exceeded {0} iterations")]
    BurnInTooLong(usize),
}

/// Upper-bound trajectory `values[j] ≥ E_j` for `j = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSequence {
    pub values: Vec<f64>,
    pub description: String,
}

impl BoundSequence {
    pub fn at(&self, j: usize) -> Option<f64> {
        self.values.get(j).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_nonneg(name: &'static str, value: f64) -> Result<f64, BoundsError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(BoundsError::Invalid { name, value })
    }
}

fn check_step(index: usize, t: f64, m: f64) -> Result<(), BoundsError> {
    let product = t * m;
    if product > 0.0 && product <= 1.0 {
        Ok(())
    } else {
        Err(BoundsError::StepCondition { index, product })
    }
}

/// Iterates `E_{j+1} ≤ (1 − t_j m) E_j + t_j² (M + σ²)` from `E_0 = e0`.
///
/// With `cap = Some(L²)` every value is clipped to the cap; since any two
/// points of the domain are within `L`, the clipped sequence is still a bound.
pub fn sg_recursion_bound(
    e0: f64,
    step: &StepSchedule,
    constants: &ProblemConstants,
    horizon: usize,
    cap: Option<f64>,
) -> Result<BoundSequence, BoundsError> {
    sgm_recursion_bound(e0, step, &MomentumSchedule::Zero, constants, horizon, cap).map(|mut b| {
        b.description = "SG one-step recursion (1 - t m) E + t^2 (M + sigma^2)".into();
        b
    })
}

/// The SG recursion plus the heavy-ball cross terms
/// `2 η_j C_j + η_j² D_j` with `C_j = (L + t_j √M) L` and `D_j = L²`.
///
/// `C_j` bounds `E[(θ_j − θ* − t_j s_j)ᵀ(θ_j − θ_{j−1})]` by Cauchy–Schwarz
/// and `D_j` bounds `E‖θ_j − θ_{j−1}‖²`, both from the diameter and the
/// subgradient bound.
pub fn sgm_recursion_bound(
    e0: f64,
    step: &StepSchedule,
    momentum: &MomentumSchedule,
    constants: &ProblemConstants,
    horizon: usize,
    cap: Option<f64>,
) -> Result<BoundSequence, BoundsError> {
    let e0 = check_nonneg("e0", e0)?;
    let m = constants.strong_convexity;
    let second_moment = constants.gradient_second_moment();
    let grad_bound = constants.grad_bound_sq.sqrt();
    let l = constants.diameter;
    if let Some(c) = cap {
        check_nonneg("cap", c)?;
    }
    let clip = |x: f64| cap.map_or(x, |c| x.min(c));

    let mut values = Vec::with_capacity(horizon + 1);
    let mut e = clip(e0);
    values.push(e);
    for j in 0..horizon {
        let t = step.step_size(j)?;
        check_step(j, t, m)?;
        let eta = momentum.weight(j, t);
        if j > 0 && eta >= 1.0 {
            return Err(BoundsError::MomentumCondition { index: j, value: eta });
        }
        let cross = (l + t * grad_bound) * l;
        e = (1.0 - t * m) * e + t * t * second_moment + 2.0 * eta * cross + eta * eta * l * l;
        e = clip(e);
        values.push(e);
    }
    Ok(BoundSequence {
        values,
        description: "SGM one-step recursion with worst-case momentum cross terms".into(),
    })
}

/// Which exponent to put in the exponential SG bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentForm {
    /// `−(m Σ_{j=0}^{N−1} t_j + (m²/2) Σ_{j=0}^{N−1} t_j²)`, the form that
    /// follows from bounding `∏(1 − t_j m)` by `e^{−(x + x²/2)} ≥ 1 − x`.
    #[default]
    CurvatureWeighted,
    /// `−Σ_{j=1}^{N} (t_j + 2 t_j²)`.
    StepPlusTwiceSquare,
    /// `−Σ_{j=1}^{N} (t_j + t_j²/2)`.
    StepPlusHalfSquare,
}

/// Data-calibrated constants of an asymptotic bound: it holds for `N ≥ burn_in`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub burn_in: usize,
    pub constant: f64,
}

/// `c₀ · exp(exponent)` for the chosen exponent form.
pub fn sg_exponential_bound(
    step: &StepSchedule,
    m: f64,
    n: usize,
    calibration: Calibration,
    form: ExponentForm,
) -> Result<f64, BoundsError> {
    if n < calibration.burn_in {
        return Err(BoundsError::BeforeBurnIn {
            n,
            burn_in: calibration.burn_in,
        });
    }
    let c0 = check_nonneg("c0", calibration.constant)?;
    let exponent = match form {
        ExponentForm::CurvatureWeighted => {
            let (mut s1, mut s2) = (0.0, 0.0);
            for j in 0..n {
                let t = step.step_size(j)?;
                s1 += t;
                s2 += t * t;
            }
            -(m * s1 + 0.5 * m * m * s2)
        }
        ExponentForm::StepPlusTwiceSquare | ExponentForm::StepPlusHalfSquare => {
            let w = if form == ExponentForm::StepPlusTwiceSquare {
                2.0
            } else {
                0.5
            };
            let mut s = 0.0;
            for j in 1..=n {
                let t = step.step_size(j)?;
                s += t + w * t * t;
            }
            -s
        }
    };
    Ok(c0 * exponent.exp())
}

fn check_constant_step(a: f64, m: f64) -> Result<(), BoundsError> {
    check_nonneg("m", m)?;
    let limit = 1.0 / m;
    if !(a > 0.0 && a < limit) {
        return Err(BoundsError::StepOutOfRange { a, limit });
    }
    Ok(())
}

/// Constant-step MSE ceiling `2 (M + σ²) a / m`, valid past the burn-in.
pub fn constant_step_plateau(a: f64, m: f64, grad_bound_sq: f64, noise_variance: f64) -> Result<f64, BoundsError> {
    check_constant_step(a, m)?;
    let second = check_nonneg("M", grad_bound_sq)? + check_nonneg("sigma2", noise_variance)?;
    Ok(2.0 * second * a / m)
}

/// Longest forward scan `stage_burn_in` performs before giving up.
pub const MAX_BURN_IN_SCAN: usize = 100_000_000;

/// Smallest `N ≥ 1` with `ρ^{N−1} E_1 ≤ (M + σ²) a² / (1 − ρ)` where `ρ = 1 − a m`.
pub fn stage_burn_in(a: f64, m: f64, e1: f64, grad_bound_sq: f64, noise_variance: f64) -> Result<usize, BoundsError> {
    check_constant_step(a, m)?;
    let e1 = check_nonneg("E1", e1)?;
    let second = check_nonneg("M", grad_bound_sq)? + check_nonneg("sigma2", noise_variance)?;
    let rho = 1.0 - a * m;
    let threshold = second * a * a / (1.0 - rho);
    let mut residual = e1;
    for n in 1..=MAX_BURN_IN_SCAN {
        if residual <= threshold {
            return Ok(n);
        }
        residual *= rho;
    }
    Err(BoundsError::BurnInTooLong(MAX_BURN_IN_SCAN))
}

/// `L²` for `j < N_a` and the plateau from `N_a` on, where `N_a` is the
/// burn-in computed with the conservative start `E_1 = L²`.
pub fn plateau_bound_sequence(
    a: f64,
    constants: &ProblemConstants,
    horizon: usize,
) -> Result<BoundSequence, BoundsError> {
    let m = constants.strong_convexity;
    let l2 = constants.diameter * constants.diameter;
    let plateau = constant_step_plateau(a, m, constants.grad_bound_sq, constants.noise_variance)?;
    let burn_in = stage_burn_in(a, m, l2, constants.grad_bound_sq, constants.noise_variance)?;
    let values = (0..=horizon)
        .map(|j| if j < burn_in { l2 } else { plateau.min(l2) })
        .collect();
    Ok(BoundSequence {
        values,
        description: format!("diameter cap before burn-in {burn_in}, then plateau 2 (M + sigma^2) a / m"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeShape {
    /// `1 / (N+1)`.
    InvN,
    /// `log(N+1) / (N+1)`.
    LogNOverN,
    /// `1 / ((1 − β)(N+1)^β)`.
    InvNBeta(f64),
}

impl EnvelopeShape {
    pub fn inv_n_beta(beta: f64) -> Result<Self, BoundsError> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(BoundsError::Beta(beta));
        }
        Ok(EnvelopeShape::InvNBeta(beta))
    }

    /// Shape value at (real) `n`.
    pub fn eval(&self, n: f64) -> Result<f64, BoundsError> {
        if !(n.is_finite() && n >= 0.0) {
            return Err(BoundsError::Invalid { name: "N", value: n });
        }
        let np1 = n + 1.0;
        Ok(match *self {
            EnvelopeShape::InvN => 1.0 / np1,
            EnvelopeShape::LogNOverN => np1.ln() / np1,
            EnvelopeShape::InvNBeta(beta) => {
                if !(beta > 0.0 && beta < 1.0) {
                    return Err(BoundsError::Beta(beta));
                }
                1.0 / ((1.0 - beta) * np1.powf(beta))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEnvelope {
    pub shape: EnvelopeShape,
    pub constant: f64,
}

impl RateEnvelope {
    pub fn new(shape: EnvelopeShape, constant: f64) -> Result<Self, BoundsError> {
        check_nonneg("constant", constant)?;
        Ok(Self { shape, constant })
    }

    pub fn eval(&self, n: f64) -> Result<f64, BoundsError> {
        Ok(self.constant * self.shape.eval(n)?)
    }
}

/// `constant · shape(N)` for the envelope.
pub fn rate_envelope(envelope: &RateEnvelope, n: f64) -> Result<f64, BoundsError> {
    envelope.eval(n)
}

/// Integral comparison estimates for the power sums behind the rates.
pub mod harmonic {
    /// `Σ_{k=first}^{last} k^{−β}` summed from the small terms up.
    pub fn power_sum(beta: f64, first: usize, last: usize) -> f64 {
        (first..=last).rev().map(|k| (k as f64).powf(-beta)).sum()
    }

    /// Lower bound `log(N+1) − log 2` on `Σ_{j=1}^{N} 1/(j+1)`.
    pub fn harmonic_lower(n: usize) -> f64 {
        ((n + 1) as f64).ln() - 2f64.ln()
    }

    /// Lower bound `½(½ − 1/(N+1))` on `½ Σ_{j=1}^{N} 1/(j+1)²`.
    pub fn half_square_lower(n: usize) -> f64 {
        0.5 * (0.5 - 1.0 / (n + 1) as f64)
    }

    /// Lower bound `((N+1)^{1−α} − 2^{1−α}) / (1−α)` on `Σ_{j=1}^{N} (j+1)^{−α}`, `α ∈ (0,1)`.
    pub fn power_lower(alpha: f64, n: usize) -> f64 {
        let e = 1.0 - alpha;
        (((n + 1) as f64).powf(e) - 2f64.powf(e)) / e
    }

    /// Upper bound `(N+1)^{1−β} / (1−β)` on `Σ_{j=0}^{N} (j+1)^{−β}`, `β ∈ (0,1)`.
    pub fn power_upper(beta: f64, n: usize) -> f64 {
        let e = 1.0 - beta;
        ((n + 1) as f64).powf(e) / e
    }

    /// Upper bound `1 + log(N+1)` on `Σ_{j=0}^{N} 1/(j+1)`.
    pub fn harmonic_upper(n: usize) -> f64 {
        1.0 + ((n + 1) as f64).ln()
    }

    /// Upper bound on the running momentum average `(Σ_{i=0}^{j} η_i)/(j+1)`
    /// for `η_i = c/(i+1)^β`; tends to zero for every `β ∈ (0, 1]`.
    pub fn momentum_average_upper(c: f64, beta: f64, j: usize) -> f64 {
        let total = if beta >= 1.0 {
            harmonic_upper(j)
        } else {
            power_upper(beta, j)
        };
        c * total / (j + 1) as f64
    }
}
