//! Compact convex feasible sets with closed-form Euclidean projections.

use thiserror::Error;

use crate::rng::RandomStream;
use crate::vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: domain has dimension {expected}, point has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("ball radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("box bounds must satisfy lower < upper in every coordinate (coordinate {index}: {lower} vs {upper})")]
    InvalidBox { index: usize, lower: f64, upper: f64 },
    #[error("box lower and upper bounds have different lengths ({lower} vs {upper})")]
    BoxShape { lower: usize, upper: usize },
    #[error("domain must have dimension at least 1")]
    Empty,
    #[error("domain coordinates must be finite")]
    NonFinite,
}

/// A closed, bounded, convex set `D ⊂ ℝᵈ`.
///
/// Both shapes admit exact projections and exact diameters, which is all
/// the convergence bounds need from the feasible set.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl Domain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, GeometryError> {
        if center.is_empty() {
            return Err(GeometryError::Empty);
        }
        if !vector::all_finite(&center) {
            return Err(GeometryError::NonFinite);
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidRadius(radius));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn unit_ball(dim: usize) -> Result<Self, GeometryError> {
        Self::ball(vec![0.0; dim], 1.0)
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        if lower.len() != upper.len() {
            return Err(GeometryError::BoxShape {
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(GeometryError::Empty);
        }
        if !vector::all_finite(&lower) || !vector::all_finite(&upper) {
            return Err(GeometryError::NonFinite);
        }
        for (index, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(l < u) {
                return Err(GeometryError::InvalidBox {
                    index,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(Domain::Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } => center.len(),
            Domain::Box { lower, .. } => lower.len(),
        }
    }

    /// Exact diameter `sup ‖x − y‖` over `x, y ∈ D`.
    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::Box { lower, upper } => vector::dist(upper, lower),
        }
    }

    fn check_dim(&self, point: &[f64]) -> Result<(), GeometryError> {
        if point.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                actual: point.len(),
            });
        }
        Ok(())
    }

    /// Euclidean projection onto the domain.
    pub fn project(&self, point: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.check_dim(point)?;
        let mut out = point.to_vec();
        self.project_in_place(&mut out);
        Ok(out)
    }

    /// Projects `point` in place. The caller guarantees matching dimension.
    ///
    /// Points already inside are returned untouched, and the ball branch
    /// shrinks its scale factor until the rounded result passes the same
    /// membership test, so projection is idempotent bit-for-bit.
    pub fn project_in_place(&self, point: &mut [f64]) {
        debug_assert_eq!(point.len(), self.dim());
        match self {
            Domain::Ball { center, radius } => {
                let dist = vector::dist(point, center);
                if dist <= *radius {
                    return;
                }
                let offset: Vec<f64> = point.iter().zip(center).map(|(p, c)| p - c).collect();
                let mut scale = radius / dist;
                loop {
                    for ((p, c), o) in point.iter_mut().zip(center).zip(&offset) {
                        *p = c + o * scale;
                    }
                    if vector::dist(point, center) <= *radius {
                        break;
                    }
                    scale = scale.next_down();
                }
            }
            Domain::Box { lower, upper } => {
                for ((p, &l), &u) in point.iter_mut().zip(lower).zip(upper) {
                    *p = p.clamp(l, u);
                }
            }
        }
    }

    /// Euclidean distance from `point` to the set (zero inside).
    pub fn distance(&self, point: &[f64]) -> Result<f64, GeometryError> {
        self.check_dim(point)?;
        Ok(match self {
            Domain::Ball { center, radius } => (vector::dist(point, center) - radius).max(0.0),
            Domain::Box { lower, upper } => point
                .iter()
                .zip(lower)
                .zip(upper)
                .map(|((&p, &l), &u)| {
                    let excess = (l - p).max(p - u).max(0.0);
                    excess * excess
                })
                .sum::<f64>()
                .sqrt(),
        })
    }

    /// Whether `point` lies within `tolerance` of the (closed) domain.
    ///
    /// A point of the wrong dimension is never contained.
    pub fn contains(&self, point: &[f64], tolerance: f64) -> bool {
        self.distance(point).is_ok_and(|d| d <= tolerance)
    }

    /// Whether `point` lies in the interior with at least `margin` clearance.
    pub fn contains_with_margin(&self, point: &[f64], margin: f64) -> bool {
        if point.len() != self.dim() {
            return false;
        }
        match self {
            Domain::Ball { center, radius } => vector::dist(point, center) <= radius - margin,
            Domain::Box { lower, upper } => point
                .iter()
                .zip(lower)
                .zip(upper)
                .all(|((&p, &l), &u)| p >= l + margin && p <= u - margin),
        }
    }

    /// Distance from `point` to the farthest point of the domain.
    pub fn farthest_distance(&self, point: &[f64]) -> Result<f64, GeometryError> {
        self.check_dim(point)?;
        Ok(match self {
            Domain::Ball { center, radius } => vector::dist(point, center) + radius,
            Domain::Box { lower, upper } => point
                .iter()
                .zip(lower)
                .zip(upper)
                .map(|((&p, &l), &u)| {
                    let far = (p - l).abs().max((u - p).abs());
                    far * far
                })
                .sum::<f64>()
                .sqrt(),
        })
    }

    /// Draws a point uniformly from the domain.
    pub fn sample_uniform(&self, rng: &mut RandomStream) -> Vec<f64> {
        match self {
            Domain::Ball { center, radius } => {
                // Rejection from the bounding cube; fine for the low dimensions used here.
                let mut offset = vec![0.0; center.len()];
                loop {
                    for o in offset.iter_mut() {
                        *o = (2.0 * rng.uniform() - 1.0) * radius;
                    }
                    if vector::norm(&offset) < *radius {
                        break;
                    }
                }
                center.iter().zip(&offset).map(|(c, o)| c + o).collect()
            }
            Domain::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| l + (u - l) * rng.uniform())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Domain {
        Domain::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn ball_projection_scales_radially() {
        let d = Domain::unit_ball(2).unwrap();
        assert_eq!(d.project(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(d.project(&[0.3, 0.4]).unwrap(), vec![0.3, 0.4]);
    }

    #[test]
    fn box_projection_clamps() {
        assert_eq!(square().project(&[0.5, -2.0]).unwrap(), vec![0.5, -1.0]);
    }

    #[test]
    fn diameters() {
        assert_eq!(Domain::unit_ball(3).unwrap().diameter(), 2.0);
        let b = Domain::boxed(vec![0.0, 0.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(b.diameter(), 5.0);
        let b1 = Domain::boxed(vec![-1.0], vec![1.0]).unwrap();
        assert_eq!(b1.diameter(), 2.0);
    }

    #[test]
    fn containment_is_closed() {
        let d = Domain::unit_ball(2).unwrap();
        assert!(d.contains(&[1.0, 0.0], 0.0));
        assert!(!d.contains(&[1.0 + 1e-6, 0.0], 1e-9));
        assert!(square().contains(&[0.0, 0.0], 0.0));
        assert!(square().contains(&[1.0, -1.0], 0.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let d = Domain::unit_ball(2).unwrap();
        assert_eq!(
            d.project(&[1.0]),
            Err(GeometryError::DimensionMismatch { expected: 2, actual: 1 })
        );
        assert!(!d.contains(&[0.0], 1.0));
    }

    #[test]
    fn invalid_shapes() {
        assert!(Domain::ball(vec![0.0], 0.0).is_err());
        assert!(Domain::ball(vec![0.0], f64::INFINITY).is_err());
        assert!(Domain::boxed(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(Domain::boxed(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(Domain::boxed(vec![], vec![]).is_err());
    }

    #[test]
    fn off_center_ball_projection_is_idempotent() {
        let d = Domain::ball(vec![0.1, -0.7, 3.3], 0.37).unwrap();
        let p = d.project(&[5.0, 2.0, -1.0]).unwrap();
        assert!(d.contains(&p, 0.0));
        assert_eq!(d.project(&p).unwrap(), p);
    }

    #[test]
    fn farthest_distance_matches_corners() {
        let b = Domain::boxed(vec![0.0, 0.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(b.farthest_distance(&[0.0, 0.0]).unwrap(), 5.0);
        let ball = Domain::ball(vec![0.0, 0.0], 2.0).unwrap();
        assert_eq!(ball.farthest_distance(&[0.0, 1.0]).unwrap(), 3.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn domains() -> impl Strategy<Value = Domain> {
            prop_oneof![
                (prop::collection::vec(-3.0..3.0f64, 3), 0.1..4.0f64).prop_map(|(c, r)| Domain::ball(c, r).unwrap()),
                (
                    prop::collection::vec(-3.0..3.0f64, 3),
                    prop::collection::vec(0.1..4.0f64, 3)
                )
                    .prop_map(|(l, w)| {
                        let u = l.iter().zip(&w).map(|(a, b)| a + b).collect();
                        Domain::boxed(l, u).unwrap()
                    }),
            ]
        }

        proptest! {
            #[test]
            fn projection_is_idempotent_and_feasible(
                d in domains(),
                x in prop::collection::vec(-10.0..10.0f64, 3),
            ) {
                let p = d.project(&x).unwrap();
                prop_assert!(d.contains(&p, 1e-12));
                prop_assert_eq!(d.project(&p).unwrap(), p);
            }

            #[test]
            fn projection_is_nonexpansive(
                d in domains(),
                x in prop::collection::vec(-10.0..10.0f64, 3),
                y in prop::collection::vec(-10.0..10.0f64, 3),
            ) {
                let px = d.project(&x).unwrap();
                let py = d.project(&y).unwrap();
                prop_assert!(vector::dist(&px, &py) <= vector::dist(&x, &y) * (1.0 + 1e-12));
            }
        }
    }
}
