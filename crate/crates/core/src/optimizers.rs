//! Projected one-step update kernels: SG, Polyak heavy-ball SGM, the
//! normalized (EMA) form of SGM, and quasi-hyperbolic momentum.
//!
//! Gradient samples come from the caller so that equivalence checks can
//! replay one noise stream through several variants.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::{Domain, GeometryError};
use crate::vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("initial point lies outside the domain (distance {distance:e})")]
    InfeasibleStart { distance: f64 },
    #[error("non-finite value encountered at step {step}")]
    NonFinite { step: usize },
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("unknown variant {0:?}; expected one of sg, sgm, nsgm, qhm")]
    UnknownVariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// `θ⁺ = P(θ − t g)`.
    Sg,
    /// `θ⁺ = P(θ − t g + η (θ − θ⁻))`.
    Sgm,
    /// `z = β g + (1 − β) z⁻`, `θ⁺ = P(θ − α z)`.
    NormalizedSgm,
    /// `m = (1 − β) g + β m⁻`, `θ⁺ = P(θ − α[(1 − v) g + v m])`.
    Qhm { v: f64 },
}

impl Variant {
    pub fn qhm(v: f64) -> Result<Self, OptimizerError> {
        if !(0.0..=1.0).contains(&v) {
            return Err(OptimizerError::InvalidParameter {
                name: "v",
                value: v,
                reason: "must lie in [0, 1]",
            });
        }
        Ok(Variant::Qhm { v })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Sg => "sg",
            Variant::Sgm => "sgm",
            Variant::NormalizedSgm => "nsgm",
            Variant::Qhm { .. } => "qhm",
        }
    }

    fn has_velocity(&self) -> bool {
        matches!(self, Variant::NormalizedSgm | Variant::Qhm { .. })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses the config names; `qhm` gets `v = 1` until set explicitly.
impl FromStr for Variant {
    type Err = OptimizerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sg" => Ok(Variant::Sg),
            "sgm" => Ok(Variant::Sgm),
            "nsgm" => Ok(Variant::NormalizedSgm),
            "qhm" => Ok(Variant::Qhm { v: 1.0 }),
            other => Err(OptimizerError::UnknownVariant(other.to_string())),
        }
    }
}

/// Hyperparameters for one step.
///
/// For SG/SGM `rate` is the step size `t_j` and `momentum` is `η_j`.
/// For the normalized SGM and QHM `rate` is `α_j` and `momentum` is `β_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub rate: f64,
    pub momentum: f64,
}

impl StepParams {
    pub fn new(rate: f64, momentum: f64) -> Self {
        Self { rate, momentum }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    variant: Variant,
    theta_curr: Vec<f64>,
    theta_prev: Vec<f64>,
    /// EMA buffer (`z` or `m`); empty for SG and SGM.
    velocity: Vec<f64>,
    j: usize,
}

impl IterateState {
    /// Starts at `theta0` with `θ_{−1} = θ_0`, so the first momentum term vanishes.
    pub fn init(theta0: &[f64], variant: Variant, domain: &Domain) -> Result<Self, OptimizerError> {
        let distance = domain.distance(theta0)?;
        if distance > 0.0 {
            return Err(OptimizerError::InfeasibleStart { distance });
        }
        if !vector::all_finite(theta0) {
            return Err(OptimizerError::NonFinite { step: 0 });
        }
        let velocity = if variant.has_velocity() {
            vec![0.0; theta0.len()]
        } else {
            Vec::new()
        };
        Ok(Self {
            variant,
            theta_curr: theta0.to_vec(),
            theta_prev: theta0.to_vec(),
            velocity,
            j: 0,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta_curr
    }

    pub fn previous(&self) -> &[f64] {
        &self.theta_prev
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// Number of steps taken so far.
    pub fn iteration(&self) -> usize {
        self.j
    }

    /// Resets the momentum history at the current point: `θ_prev = θ_curr`,
    /// velocity zeroed, counter back to 0.
    pub fn restart(&mut self) {
        self.theta_prev.copy_from_slice(&self.theta_curr);
        self.velocity.iter_mut().for_each(|v| *v = 0.0);
        self.j = 0;
    }

    /// Advances one iteration in place using gradient sample `g`.
    pub fn step(&mut self, g: &[f64], params: StepParams, domain: &Domain) -> Result<(), OptimizerError> {
        debug_assert_eq!(g.len(), self.theta_curr.len());
        if !vector::all_finite(g) || !params.rate.is_finite() || !params.momentum.is_finite() {
            return Err(OptimizerError::NonFinite { step: self.j });
        }
        let StepParams { rate, momentum } = params;
        // The new iterate is written into the `prev` buffer, then the buffers swap.
        match self.variant {
            Variant::Sg => {
                for ((next, &cur), &gk) in self.theta_prev.iter_mut().zip(&self.theta_curr).zip(g) {
                    *next = cur - rate * gk;
                }
            }
            Variant::Sgm => {
                for ((next, &cur), &gk) in self.theta_prev.iter_mut().zip(&self.theta_curr).zip(g) {
                    let prev = *next;
                    *next = cur - rate * gk + momentum * (cur - prev);
                }
            }
            Variant::NormalizedSgm => {
                let keep = 1.0 - momentum;
                for (((next, &cur), z), &gk) in self
                    .theta_prev
                    .iter_mut()
                    .zip(&self.theta_curr)
                    .zip(self.velocity.iter_mut())
                    .zip(g)
                {
                    *z = momentum * gk + keep * *z;
                    *next = cur - rate * *z;
                }
            }
            Variant::Qhm { v } => {
                let fresh = 1.0 - momentum;
                let direct = rate * (1.0 - v);
                let averaged = rate * v;
                for (((next, &cur), m), &gk) in self
                    .theta_prev
                    .iter_mut()
                    .zip(&self.theta_curr)
                    .zip(self.velocity.iter_mut())
                    .zip(g)
                {
                    *m = fresh * gk + momentum * *m;
                    *next = cur - direct * gk - averaged * *m;
                }
            }
        }
        domain.project_in_place(&mut self.theta_prev);
        std::mem::swap(&mut self.theta_prev, &mut self.theta_curr);
        if !vector::all_finite(&self.theta_curr) || !vector::all_finite(&self.velocity) {
            return Err(OptimizerError::NonFinite { step: self.j });
        }
        self.j += 1;
        Ok(())
    }
}

/// Normalized-SGM hyperparameters `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsgmParams {
    pub alpha: f64,
    pub beta: f64,
}

/// Parameters under which QHM with `v = 1` and the normalized SGM produce
/// the same trajectory.
///
/// QHM keeps `β` on the history while the normalized form puts it on the
/// fresh gradient, so the mapping is `(α, β) ↦ (α, 1 − β)`.
pub fn map_qhm_to_nsgm(alpha: f64, beta: f64) -> Result<NsgmParams, OptimizerError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(OptimizerError::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must be positive",
        });
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(OptimizerError::InvalidParameter {
            name: "beta",
            value: beta,
            reason: "must lie in [0, 1); beta = 1 never absorbs new gradients",
        });
    }
    Ok(NsgmParams {
        alpha,
        beta: 1.0 - beta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    /// `t = αβ`, `η = α(1 − β)`.
    Printed,
    /// `t = αβ`, `η = 1 − β`, obtained by eliminating `z` from the update.
    Eliminated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgmCoupling {
    pub step: f64,
    pub momentum: f64,
    pub kind: CouplingKind,
    /// Max iterate deviation from the normalized trajectory under each candidate.
    pub printed_deviation: f64,
    pub eliminated_deviation: f64,
}

/// Steps in the trajectory comparison that decides the coupling.
const COUPLING_TRIAL_STEPS: usize = 10;

/// Max deviation between the normalized SGM and SGM with `(t, η)` over a
/// short noiseless run on `f(θ) = ½θ²` from `θ_0 = 1` with an inactive projection.
fn coupling_deviation(alpha: f64, beta: f64, step: f64, momentum: f64) -> f64 {
    let domain = Domain::ball(vec![0.0], 1e6).expect("valid ball");
    let mut nsgm = IterateState::init(&[1.0], Variant::NormalizedSgm, &domain).expect("feasible");
    let mut sgm = IterateState::init(&[1.0], Variant::Sgm, &domain).expect("feasible");
    let mut worst: f64 = 0.0;
    for _ in 0..COUPLING_TRIAL_STEPS {
        let ga = [nsgm.theta()[0]];
        let gb = [sgm.theta()[0]];
        if nsgm.step(&ga, StepParams::new(alpha, beta), &domain).is_err()
            || sgm.step(&gb, StepParams::new(step, momentum), &domain).is_err()
        {
            return f64::INFINITY;
        }
        worst = worst.max((nsgm.theta()[0] - sgm.theta()[0]).abs());
    }
    worst
}

/// Finds the `(t, η)` under which Polyak SGM reproduces the normalized SGM.
///
/// Both candidate couplings are simulated side by side against the
/// normalized update and the one with the smaller deviation is returned.
pub fn map_nsgm_to_sgm(alpha: f64, beta: f64) -> Result<SgmCoupling, OptimizerError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(OptimizerError::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must be positive; with alpha = 0 both methods freeze",
        });
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(OptimizerError::InvalidParameter {
            name: "beta",
            value: beta,
            reason: "must lie in (0, 1)",
        });
    }
    let step = alpha * beta;
    let printed = alpha * (1.0 - beta);
    let eliminated = 1.0 - beta;
    let printed_deviation = coupling_deviation(alpha, beta, step, printed);
    let eliminated_deviation = coupling_deviation(alpha, beta, step, eliminated);
    let (momentum, kind) = if printed_deviation < eliminated_deviation {
        (printed, CouplingKind::Printed)
    } else {
        (eliminated, CouplingKind::Eliminated)
    };
    Ok(SgmCoupling {
        step,
        momentum,
        kind,
        printed_deviation,
        eliminated_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wide() -> Domain {
        Domain::ball(vec![0.0], 10.0).unwrap()
    }

    #[test]
    fn init_examples() {
        let s = IterateState::init(&[0.5], Variant::Sgm, &wide()).unwrap();
        assert_eq!(s.theta(), &[0.5]);
        assert_eq!(s.previous(), &[0.5]);
        assert_eq!(s.iteration(), 0);
        assert!(s.velocity().is_empty());

        let err = IterateState::init(&[2.0], Variant::Sg, &Domain::unit_ball(1).unwrap());
        assert!(matches!(err, Err(OptimizerError::InfeasibleStart { .. })));

        let q = IterateState::init(&[0.0, 0.0], Variant::qhm(0.7).unwrap(), &Domain::unit_ball(2).unwrap()).unwrap();
        assert_eq!(q.velocity(), &[0.0, 0.0]);
    }

    #[test]
    fn sgm_substitution_example() {
        let mut s = IterateState::init(&[2.0], Variant::Sgm, &wide()).unwrap();
        // Move to θ_curr = 1, θ_prev = 2 with a plain gradient step first.
        s.step(&[10.0], StepParams::new(0.1, 0.0), &wide()).unwrap();
        assert_eq!(s.theta(), &[1.0]);
        s.step(&[1.0], StepParams::new(0.1, 0.5), &wide()).unwrap();
        assert!((s.theta()[0] - 0.4).abs() < 1e-15);
        assert_eq!(s.previous(), &[1.0]);
        assert_eq!(s.iteration(), 2);
    }

    #[test]
    fn projection_applies_every_step() {
        let d = Domain::unit_ball(1).unwrap();
        let mut s = IterateState::init(&[0.9], Variant::Sgm, &d).unwrap();
        s.step(&[-10.0], StepParams::new(1.0, 0.9), &d).unwrap();
        assert!((s.theta()[0] - 1.0).abs() < 1e-15);
        assert!(d.contains(s.theta(), 0.0));
        assert!(d.contains(s.previous(), 0.0));
    }

    #[test]
    fn non_finite_gradient_names_step() {
        let mut s = IterateState::init(&[0.0], Variant::Sg, &wide()).unwrap();
        s.step(&[1.0], StepParams::new(0.1, 0.0), &wide()).unwrap();
        let err = s.step(&[f64::NAN], StepParams::new(0.1, 0.0), &wide()).unwrap_err();
        assert_eq!(err, OptimizerError::NonFinite { step: 1 });
    }

    #[test]
    fn restart_clears_history() {
        let mut s = IterateState::init(&[0.0], Variant::NormalizedSgm, &wide()).unwrap();
        s.step(&[1.0], StepParams::new(0.1, 0.5), &wide()).unwrap();
        s.restart();
        assert_eq!(s.theta(), s.previous());
        assert_eq!(s.velocity(), &[0.0]);
        assert_eq!(s.iteration(), 0);
    }

    #[test]
    fn variant_names_round_trip() {
        for name in ["sg", "sgm", "nsgm", "qhm"] {
            assert_eq!(name.parse::<Variant>().unwrap().name(), name);
        }
        assert!("adam".parse::<Variant>().is_err());
        assert!(Variant::qhm(1.5).is_err());
    }

    #[test]
    fn qhm_mapping_rejects_pure_history() {
        assert!(map_qhm_to_nsgm(0.2, 1.0).is_err());
        assert!(map_qhm_to_nsgm(0.0, 0.5).is_err());
        let p = map_qhm_to_nsgm(0.2, 0.5).unwrap();
        assert_eq!((p.alpha, p.beta), (0.2, 0.5));
    }

    #[test]
    fn nsgm_mapping_rejects_frozen_or_degenerate() {
        assert!(map_nsgm_to_sgm(0.0, 0.5).is_err());
        assert!(map_nsgm_to_sgm(0.2, 0.0).is_err());
        assert!(map_nsgm_to_sgm(0.2, 1.0).is_err());
    }
}
