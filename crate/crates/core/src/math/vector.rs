use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense real vector with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector entries"));
        }
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Wraps entries produced by internal arithmetic. Callers guarantee finiteness.
    pub(crate) fn from_finite(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| v.is_finite()));
        Self(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        check_dims(self.dim(), other.dim())?;
        Vector::new(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        check_dims(self.dim(), other.dim())?;
        Vector::new(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, c: f64) -> Result<Vector> {
        Vector::new(self.0.iter().map(|a| a * c).collect())
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        Vector::new(entries)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Inner product with a fixed four-lane summation order.
///
/// The lane split is part of the contract: results are bit-identical across
/// runs and platforms with IEEE doubles.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Euclidean projection onto the ball of radius `radius`, in place.
pub fn project_ball_in_place(w: &mut [f64], radius: f64) {
    let n = norm(w);
    if n > radius {
        if radius == 0.0 {
            w.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let s = radius / n;
        w.iter_mut().for_each(|v| *v *= s);
    }
}

/// Euclidean projection onto the centered ball of radius `radius`.
pub fn project_ball(w: &Vector, radius: f64) -> Result<Vector> {
    if !(radius >= 0.0) {
        return Err(crate::error::invalid(
            "radius",
            format!("must be >= 0, got {radius}"),
        ));
    }
    let mut out = w.as_slice().to_vec();
    project_ball_in_place(&mut out, radius);
    Ok(Vector::from_finite(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_examples() {
        let inside = Vector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(project_ball(&inside, 5.0).unwrap(), inside);

        let outside = Vector::new(vec![6.0, 8.0]).unwrap();
        assert_eq!(project_ball(&outside, 5.0).unwrap().as_slice(), &[3.0, 4.0]);

        let zero = Vector::zeros(2);
        assert_eq!(project_ball(&zero, 0.0).unwrap(), zero);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
        assert!(project_ball(&Vector::zeros(1), -1.0).is_err());
    }

    #[test]
    fn dot_matches_naive_on_odd_lengths() {
        let a: Vec<f64> = (0..7).map(|i| i as f64 + 0.5).collect();
        let b: Vec<f64> = (0..7).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_feasible(
            w in prop::collection::vec(-1e3f64..1e3, 1..12),
            radius in 0.0f64..50.0,
        ) {
            let v = Vector::new(w).unwrap();
            let p = project_ball(&v, radius).unwrap();
            prop_assert!(p.norm() <= radius * (1.0 + 4.0 * f64::EPSILON) + f64::MIN_POSITIVE);
            let pp = project_ball(&p, radius).unwrap();
            for (a, b) in p.as_slice().iter().zip(pp.as_slice()) {
                prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(1e-300));
            }
        }
    }
}
