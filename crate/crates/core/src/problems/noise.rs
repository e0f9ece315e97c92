use crate::rng::RandomStream;

use super::ProblemError;

/// Zero-mean additive gradient noise with total variance `E‖n‖² = σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Spherical normal, each coordinate `N(0, σ²/d)`.
    Gaussian { sigma2: f64 },
    /// Each coordinate independently `±σ/√d`.
    BoundedRademacher { sigma2: f64 },
}

fn check_variance(sigma2: f64) -> Result<f64, ProblemError> {
    if sigma2.is_finite() && sigma2 >= 0.0 {
        Ok(sigma2)
    } else {
        Err(ProblemError::InvalidParameter(format!(
            "noise variance must be finite and nonnegative, got {sigma2}"
        )))
    }
}

impl NoiseModel {
    pub fn gaussian(sigma2: f64) -> Result<Self, ProblemError> {
        Ok(Self::Gaussian {
            sigma2: check_variance(sigma2)?,
        })
    }

    pub fn bounded_rademacher(sigma2: f64) -> Result<Self, ProblemError> {
        Ok(Self::BoundedRademacher {
            sigma2: check_variance(sigma2)?,
        })
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma2 } | NoiseModel::BoundedRademacher { sigma2 } => sigma2,
        }
    }

    /// Adds one draw of `n` to `out`. A zero-variance model leaves `out`
    /// untouched and consumes no randomness.
    pub fn add_sample(&self, rng: &mut RandomStream, out: &mut [f64]) {
        let sigma2 = self.variance();
        if sigma2 == 0.0 {
            return;
        }
        let scale = (sigma2 / out.len() as f64).sqrt();
        match self {
            NoiseModel::Gaussian { .. } => {
                for o in out.iter_mut() {
                    *o += scale * rng.standard_normal();
                }
            }
            NoiseModel::BoundedRademacher { .. } => {
                for o in out.iter_mut() {
                    *o += scale * rng.sign();
                }
            }
        }
    }

    pub fn sample(&self, dim: usize, rng: &mut RandomStream) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        self.add_sample(rng, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_variance_rejected() {
        assert!(NoiseModel::gaussian(-1.0).is_err());
        assert!(NoiseModel::bounded_rademacher(f64::NAN).is_err());
    }

    #[test]
    fn rademacher_norm_is_constant() {
        let model = NoiseModel::bounded_rademacher(3.0).unwrap();
        let mut rng = RandomStream::from_seed(3);
        for _ in 0..100 {
            let n = model.sample(3, &mut rng);
            assert!((crate::vector::norm_sq(&n) - 3.0).abs() < 1e-12);
        }
    }
}
