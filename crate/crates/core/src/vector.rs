//! Small dense-vector helpers over `f64` slices.
//!
//! Problems in this crate live in low dimension and the optimizer inner
//! loop runs hundreds of millions of times, so iterates are plain slices
//! updated in place rather than heap-allocated vector types.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// Squared Euclidean distance `‖a − b‖²`.
#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_identities() {
        let a = [3.0, 4.0];
        let b = [0.0, 0.0];
        assert_eq!(norm(&a), 5.0);
        assert_eq!(dist(&a, &b), 5.0);
        assert_eq!(dot(&a, &[1.0, -1.0]), -1.0);
        assert!(all_finite(&a));
        assert!(!all_finite(&[1.0, f64::NAN]));
    }
}
