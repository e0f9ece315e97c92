//! Strongly convex test objectives with exactly known constants and their
//! stochastic first-order oracles `g(θ; z) = s + n`.

mod least_squares;
mod noise;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{Domain, GeometryError};
use crate::rng::RandomStream;
use crate::vector;

pub use least_squares::LeastSquares;
pub use noise::NoiseModel;

/// Required clearance between the minimizer and the domain boundary.
pub const INTERIOR_MARGIN: f64 = 1e-9;
/// Tolerance for the membership precondition of the oracle calls.
pub const DOMAIN_TOLERANCE: f64 = 1e-9;
/// Strong-convexity constants at or below this are treated as degenerate.
pub const DEGENERATE_CURVATURE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{what} has length {actual}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("minimizer {theta_star:?} is not in the interior of the domain (margin {INTERIOR_MARGIN})")]
    MinimizerOutsideDomain { theta_star: Vec<f64> },
    #[error("degenerate problem: strong-convexity constant {0:e} is not positive")]
    Degenerate(f64),
    #[error("point lies {distance:e} outside the domain")]
    OutOfDomain { distance: f64 },
    #[error("CSV parse error at row {row}, column {col}: {message}")]
    Parse { row: usize, col: usize, message: String },
    #[error("numerical solve failed: {0}")]
    Solve(String),
    #[error("I/O error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Where the randomness in the gradient oracle comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GradientNoise {
    /// `g = s + n` with `n` drawn from the model.
    Additive(NoiseModel),
    /// Least-squares only: average the per-sample gradients of `batch_size`
    /// rows drawn uniformly with replacement.
    Minibatch { batch_size: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `½ Σ h_k (θ_k − θ*_k)²`.
    Quadratic {
        hessian_diag: Vec<f64>,
        theta_star: Vec<f64>,
    },
    /// `½ Σ h_k (θ_k − θ*_k)² + c Σ |θ_k − θ*_k|`.
    QuadPlusL1 {
        hessian_diag: Vec<f64>,
        theta_star: Vec<f64>,
        l1_weight: f64,
    },
    /// `1/(2N) Σ (x_iᵀθ − y_i)²`.
    LeastSquares(LeastSquares),
}

/// The symbols the convergence bounds are stated in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemConstants {
    /// `m`: strong-convexity modulus over the domain.
    pub strong_convexity: f64,
    /// `M`: squared bound on subgradient norms, `‖s‖ ≤ √M` on the domain.
    pub grad_bound_sq: f64,
    /// `σ²`: bound on `E‖n‖²`.
    pub noise_variance: f64,
    /// `L`: diameter of the domain.
    pub diameter: f64,
    pub theta_star: Vec<f64>,
}

impl ProblemConstants {
    /// `M + σ²`, the second-moment bound on a gradient sample.
    pub fn gradient_second_moment(&self) -> f64 {
        self.grad_bound_sq + self.noise_variance
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    objective: Objective,
    domain: Domain,
    noise: GradientNoise,
    constants: ProblemConstants,
}

fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), ProblemError> {
    if v.len() != expected {
        return Err(ProblemError::DimensionMismatch {
            what,
            expected,
            actual: v.len(),
        });
    }
    Ok(())
}

fn check_curvatures(hessian_diag: &[f64]) -> Result<f64, ProblemError> {
    if !vector::all_finite(hessian_diag) {
        return Err(ProblemError::InvalidParameter(
            "hessian_diag entries must be finite".into(),
        ));
    }
    let m = hessian_diag.iter().copied().fold(f64::INFINITY, f64::min);
    if m <= DEGENERATE_CURVATURE {
        return Err(ProblemError::Degenerate(m));
    }
    Ok(m)
}

impl Problem {
    pub fn quadratic(
        hessian_diag: Vec<f64>,
        theta_star: Vec<f64>,
        domain: Domain,
        noise: NoiseModel,
    ) -> Result<Self, ProblemError> {
        Self::build(
            Objective::Quadratic {
                hessian_diag,
                theta_star,
            },
            domain,
            GradientNoise::Additive(noise),
        )
    }

    pub fn quad_plus_l1(
        hessian_diag: Vec<f64>,
        theta_star: Vec<f64>,
        l1_weight: f64,
        domain: Domain,
        noise: NoiseModel,
    ) -> Result<Self, ProblemError> {
        Self::build(
            Objective::QuadPlusL1 {
                hessian_diag,
                theta_star,
                l1_weight,
            },
            domain,
            GradientNoise::Additive(noise),
        )
    }

    /// Least squares over the rows of `design` (each of length `d`).
    pub fn least_squares(
        design: Vec<Vec<f64>>,
        targets: Vec<f64>,
        domain: Domain,
        noise: GradientNoise,
    ) -> Result<Self, ProblemError> {
        let ls = LeastSquares::new(design, targets)?;
        Self::build(Objective::LeastSquares(ls), domain, noise)
    }

    /// Reads a headerless CSV whose rows are `x_1, …, x_d, y`.
    pub fn load_least_squares_csv(
        path: impl AsRef<std::path::Path>,
        domain: Domain,
        noise: GradientNoise,
    ) -> Result<Self, ProblemError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| ProblemError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_least_squares_csv(file, domain, noise)
    }

    pub fn read_least_squares_csv<R: std::io::Read>(
        reader: R,
        domain: Domain,
        noise: GradientNoise,
    ) -> Result<Self, ProblemError> {
        let (design, targets) = least_squares::read_csv(reader)?;
        Self::least_squares(design, targets, domain, noise)
    }

    fn build(objective: Objective, domain: Domain, noise: GradientNoise) -> Result<Self, ProblemError> {
        let d = domain.dim();
        let (strong_convexity, max_curvature, theta_star, l1) = match &objective {
            Objective::Quadratic {
                hessian_diag,
                theta_star,
            } => {
                check_len("hessian_diag", hessian_diag, d)?;
                check_len("theta_star", theta_star, d)?;
                let m = check_curvatures(hessian_diag)?;
                let h_max = hessian_diag.iter().copied().fold(0.0, f64::max);
                (m, h_max, theta_star.clone(), 0.0)
            }
            Objective::QuadPlusL1 {
                hessian_diag,
                theta_star,
                l1_weight,
            } => {
                check_len("hessian_diag", hessian_diag, d)?;
                check_len("theta_star", theta_star, d)?;
                if !(l1_weight.is_finite() && *l1_weight >= 0.0) {
                    return Err(ProblemError::InvalidParameter(format!(
                        "l1_weight must be finite and nonnegative, got {l1_weight}"
                    )));
                }
                let m = check_curvatures(hessian_diag)?;
                let h_max = hessian_diag.iter().copied().fold(0.0, f64::max);
                (m, h_max, theta_star.clone(), *l1_weight)
            }
            Objective::LeastSquares(ls) => {
                if ls.dim() != d {
                    return Err(ProblemError::DimensionMismatch {
                        what: "design columns",
                        expected: d,
                        actual: ls.dim(),
                    });
                }
                (ls.min_eigenvalue(), ls.max_eigenvalue(), ls.theta_star().to_vec(), 0.0)
            }
        };
        if !vector::all_finite(&theta_star) {
            return Err(ProblemError::InvalidParameter("theta_star must be finite".into()));
        }
        if !domain.contains_with_margin(&theta_star, INTERIOR_MARGIN) {
            return Err(ProblemError::MinimizerOutsideDomain { theta_star });
        }
        let far = domain.farthest_distance(&theta_star)?;
        let grad_bound = max_curvature * far + l1 * (d as f64).sqrt();
        let noise_variance = match (&noise, &objective) {
            (GradientNoise::Additive(model), _) => model.variance(),
            (GradientNoise::Minibatch { batch_size }, Objective::LeastSquares(ls)) => {
                if *batch_size == 0 {
                    return Err(ProblemError::InvalidParameter("batch_size must be at least 1".into()));
                }
                ls.minibatch_variance_bound(&domain, *batch_size)
            }
            (GradientNoise::Minibatch { .. }, _) => {
                return Err(ProblemError::InvalidParameter(
                    "minibatch noise is only available for least-squares problems".into(),
                ))
            }
        };
        let constants = ProblemConstants {
            strong_convexity,
            grad_bound_sq: grad_bound * grad_bound,
            noise_variance,
            diameter: domain.diameter(),
            theta_star,
        };
        Ok(Self {
            objective,
            domain,
            noise,
            constants,
        })
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn noise(&self) -> &GradientNoise {
        &self.noise
    }

    pub fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.constants.theta_star
    }

    fn check_point(&self, theta: &[f64]) -> Result<(), ProblemError> {
        let distance = self.domain.distance(theta)?;
        if distance > DOMAIN_TOLERANCE {
            return Err(ProblemError::OutOfDomain { distance });
        }
        Ok(())
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64, ProblemError> {
        self.check_point(theta)?;
        Ok(match &self.objective {
            Objective::Quadratic {
                hessian_diag,
                theta_star,
            } => quadratic_value(hessian_diag, theta_star, theta),
            Objective::QuadPlusL1 {
                hessian_diag,
                theta_star,
                l1_weight,
            } => {
                let l1: f64 = theta.iter().zip(theta_star).map(|(t, s)| (t - s).abs()).sum();
                quadratic_value(hessian_diag, theta_star, theta) + l1_weight * l1
            }
            Objective::LeastSquares(ls) => ls.value(theta),
        })
    }

    /// A member of `∂f(θ)`. At an l1 kink the l1 component is taken as 0.
    pub fn subgradient(&self, theta: &[f64]) -> Result<Vec<f64>, ProblemError> {
        self.check_point(theta)?;
        let mut out = vec![0.0; self.dim()];
        self.subgradient_into(theta, &mut out);
        Ok(out)
    }

    /// Unchecked subgradient; `theta` must already be feasible.
    pub fn subgradient_into(&self, theta: &[f64], out: &mut [f64]) {
        match &self.objective {
            Objective::Quadratic {
                hessian_diag,
                theta_star,
            } => {
                for (((o, h), t), s) in out.iter_mut().zip(hessian_diag).zip(theta).zip(theta_star) {
                    *o = h * (t - s);
                }
            }
            Objective::QuadPlusL1 {
                hessian_diag,
                theta_star,
                l1_weight,
            } => {
                for (((o, h), t), s) in out.iter_mut().zip(hessian_diag).zip(theta).zip(theta_star) {
                    let diff = t - s;
                    let kink = if diff > 0.0 {
                        *l1_weight
                    } else if diff < 0.0 {
                        -l1_weight
                    } else {
                        0.0
                    };
                    *o = h * diff + kink;
                }
            }
            Objective::LeastSquares(ls) => ls.gradient_into(theta, out),
        }
    }

    /// One stochastic gradient sample at a feasible point.
    pub fn noisy_gradient(&self, theta: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>, ProblemError> {
        self.check_point(theta)?;
        let mut out = vec![0.0; self.dim()];
        self.gradient_sample_into(theta, rng, &mut out);
        Ok(out)
    }

    /// Unchecked gradient sample; `theta` must already be feasible.
    pub fn gradient_sample_into(&self, theta: &[f64], rng: &mut RandomStream, out: &mut [f64]) {
        match (&self.noise, &self.objective) {
            (GradientNoise::Additive(model), _) => {
                self.subgradient_into(theta, out);
                model.add_sample(rng, out);
            }
            (GradientNoise::Minibatch { batch_size }, Objective::LeastSquares(ls)) => {
                ls.minibatch_gradient_into(theta, *batch_size, rng, out);
            }
            (GradientNoise::Minibatch { .. }, _) => {
                unreachable!("rejected at construction")
            }
        }
    }
}

fn quadratic_value(hessian_diag: &[f64], theta_star: &[f64], theta: &[f64]) -> f64 {
    0.5 * hessian_diag
        .iter()
        .zip(theta)
        .zip(theta_star)
        .map(|((h, t), s)| h * (t - s) * (t - s))
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(diag: Vec<f64>, star: Vec<f64>, radius: f64) -> Problem {
        let d = diag.len();
        Problem::quadratic(
            diag,
            star,
            Domain::ball(vec![0.0; d], radius).unwrap(),
            NoiseModel::gaussian(0.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn quadratic_value_and_gradient() {
        let p = quad(vec![1.0, 1.0], vec![0.0, 0.0], 2.0);
        assert_eq!(p.value(&[1.0, 0.0]).unwrap(), 0.5);
        let p = quad(vec![2.0, 3.0], vec![0.0, 0.0], 2.0);
        assert_eq!(p.subgradient(&[1.0, 1.0]).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn l1_value_and_kink_rule() {
        let dom = Domain::ball(vec![0.0], 5.0).unwrap();
        let p = Problem::quad_plus_l1(vec![1.0], vec![0.0], 2.0, dom, NoiseModel::gaussian(0.0).unwrap()).unwrap();
        assert_eq!(p.value(&[3.0]).unwrap(), 10.5);
        assert_eq!(p.subgradient(&[0.0]).unwrap(), vec![0.0]);
        assert_eq!(p.subgradient(&[-1.0]).unwrap(), vec![-3.0]);
    }

    #[test]
    fn least_squares_value() {
        let p = Problem::least_squares(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            Domain::unit_ball(2).unwrap().clone(),
            GradientNoise::Additive(NoiseModel::gaussian(0.0).unwrap()),
        );
        // θ* = 0 sits exactly at the center.
        let p = p.unwrap();
        let p_big = Problem::least_squares(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            Domain::ball(vec![0.0, 0.0], 2.0).unwrap(),
            GradientNoise::Additive(NoiseModel::gaussian(0.0).unwrap()),
        )
        .unwrap();
        assert_eq!(p_big.value(&[1.0, 1.0]).unwrap(), 0.5);
        assert_eq!(p.constants().strong_convexity, 0.5);
    }

    #[test]
    fn closed_form_constants() {
        let p = quad(vec![1.0, 4.0], vec![0.0, 0.0], 1.0);
        let c = p.constants();
        assert_eq!(c.strong_convexity, 1.0);
        assert_eq!(c.grad_bound_sq.sqrt(), 4.0);
        assert_eq!(c.diameter, 2.0);
    }

    #[test]
    fn rank_deficient_design_is_degenerate() {
        let err = Problem::least_squares(
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            vec![0.0, 0.0],
            Domain::ball(vec![0.0, 0.0], 2.0).unwrap(),
            GradientNoise::Additive(NoiseModel::gaussian(0.0).unwrap()),
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::Degenerate(_)), "{err}");
    }

    #[test]
    fn minimizer_must_be_interior() {
        let err = Problem::least_squares(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![10.0, 10.0],
            Domain::unit_ball(2).unwrap(),
            GradientNoise::Additive(NoiseModel::gaussian(0.0).unwrap()),
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::MinimizerOutsideDomain { .. }));
        let err = Problem::quadratic(
            vec![1.0],
            vec![1.0],
            Domain::unit_ball(1).unwrap(),
            NoiseModel::gaussian(0.0).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::MinimizerOutsideDomain { .. }));
    }

    #[test]
    fn out_of_domain_points_are_rejected() {
        let p = quad(vec![1.0], vec![0.0], 1.0);
        assert!(matches!(p.value(&[2.0]), Err(ProblemError::OutOfDomain { .. })));
        assert!(p.subgradient(&[1.0 + 1e-10]).is_ok());
        assert!(matches!(p.subgradient(&[0.0, 0.0]), Err(ProblemError::Geometry(_))));
    }

    #[test]
    fn zero_noise_gradient_is_exact() {
        let p = quad(vec![2.0, 3.0], vec![0.1, -0.2], 2.0);
        let mut rng = RandomStream::from_seed(5);
        let theta = [0.7, 0.4];
        assert_eq!(
            p.noisy_gradient(&theta, &mut rng).unwrap(),
            p.subgradient(&theta).unwrap()
        );
    }

    #[test]
    fn rademacher_support() {
        let p = Problem::quadratic(
            vec![1.0],
            vec![0.0],
            Domain::unit_ball(1).unwrap(),
            NoiseModel::bounded_rademacher(4.0).unwrap(),
        )
        .unwrap();
        let mut rng = RandomStream::from_seed(9);
        let s = p.subgradient(&[0.5]).unwrap()[0];
        for _ in 0..1000 {
            let g = p.noisy_gradient(&[0.5], &mut rng).unwrap()[0];
            assert!(g == s - 2.0 || g == s + 2.0, "{g}");
        }
    }

    #[test]
    fn minibatch_requires_least_squares() {
        let err = Problem::build(
            Objective::Quadratic {
                hessian_diag: vec![1.0],
                theta_star: vec![0.0],
            },
            Domain::unit_ball(1).unwrap(),
            GradientNoise::Minibatch { batch_size: 2 },
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::InvalidParameter(_)));
    }
}
