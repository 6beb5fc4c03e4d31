use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Tolerance on `|Σ r_k - 1|`.
pub const SUM_TOL: f64 = 1e-10;
/// Coordinates in `[-NEGATIVE_TOL, 0)` are clamped to zero.
pub const NEGATIVE_TOL: f64 = 1e-12;

/// Coordinates `r` of a decohered state `μ = Σ r_k P_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint {
    coords: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(coords, NEGATIVE_TOL)
    }

    pub(crate) fn with_tolerance(mut coords: Vec<f64>, negative_tol: f64) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidSimplex { reason: "no coordinates" });
        }
        for r in coords.iter_mut() {
            if !r.is_finite() {
                return Err(Error::InvalidSimplex { reason: "non-finite coordinate" });
            }
            if *r < -negative_tol {
                return Err(Error::InvalidSimplex { reason: "negative coordinate" });
            }
            if *r < 0.0 {
                *r = 0.0;
            }
        }
        let sum: f64 = coords.iter().sum();
        if !((sum - 1.0).abs() <= SUM_TOL) {
            return Err(Error::InvalidSimplex { reason: "simplex sum" });
        }
        Ok(Self { coords })
    }

    /// Clamps negative entries to zero and rescales to unit sum.
    pub(crate) fn projected(mut coords: Vec<f64>) -> Self {
        for r in coords.iter_mut() {
            if *r < 0.0 {
                *r = 0.0;
            }
        }
        let sum: f64 = coords.iter().sum();
        for r in coords.iter_mut() {
            *r /= sum;
        }
        Self { coords }
    }

    /// The `i`-th vertex `e_i`.
    pub fn vertex(m: usize, i: usize) -> Self {
        let mut coords = vec![0.0; m];
        coords[i] = 1.0;
        Self { coords }
    }

    pub fn barycenter(m: usize) -> Self {
        Self {
            coords: vec![1.0 / m as f64; m],
        }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.coords[k]
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// All coordinates strictly positive.
    pub fn is_interior(&self) -> bool {
        self.coords.iter().all(|&r| r > 0.0)
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        sup_distance(&self.coords, &other.coords)
    }

    /// Closest vertex in sup norm and the distance to it.
    pub fn nearest_vertex(&self) -> (usize, f64) {
        nearest_vertex(&self.coords)
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn nearest_vertex(r: &[f64]) -> (usize, f64) {
    let (i, _) = r
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
    let dist = r
        .iter()
        .enumerate()
        .map(|(k, &v)| if k == i { (1.0 - v).abs() } else { v.abs() })
        .fold(0.0, f64::max);
    (i, dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_negative_round_off_is_clamped() {
        let p = SimplexPoint::new(vec![-1e-13, 0.5, 0.5 + 1e-13]).unwrap();
        assert_eq!(p.get(0), 0.0);
        assert!(!p.is_interior());
    }

    #[test]
    fn invalid_points_are_rejected() {
        assert!(SimplexPoint::new(vec![]).is_err());
        assert!(SimplexPoint::new(vec![0.2, 0.3, 0.4]).is_err());
        assert!(SimplexPoint::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexPoint::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn nearest_vertex_distance() {
        let p = SimplexPoint::new(vec![0.1, 0.85, 0.05]).unwrap();
        let (i, d) = p.nearest_vertex();
        assert_eq!(i, 1);
        assert!((d - 0.15).abs() < 1e-15);
        assert_eq!(SimplexPoint::vertex(3, 2).nearest_vertex(), (2, 0.0));
    }

    proptest::proptest! {
        #[test]
        fn projection_lands_on_the_simplex(w in proptest::collection::vec(-1e-13f64..1.0, 2..8)) {
            if w.iter().sum::<f64>() <= 1e-9 {
                return Ok(());
            }
            let p = SimplexPoint::projected(w);
            proptest::prop_assert!(p.coords().iter().all(|&x| x >= 0.0));
            proptest::prop_assert!((p.coords().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let (i, d) = p.nearest_vertex();
            proptest::prop_assert!((d - (1.0 - p.get(i))).abs() < 1e-12);
            proptest::prop_assert!((p.sup_distance(&SimplexPoint::vertex(p.m(), i)) - d).abs() < 1e-12);
        }
    }
}
