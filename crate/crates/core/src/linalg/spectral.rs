use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{c, ComplexMatrix, HermitianOperator, C64};
use crate::error::{Error, Result};

/// Relative merge tolerance for nearly equal eigenvalues, scaled by the spectral radius.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-8;

/// A Hermitian operator with its spectral resolution `A = Σ a_k P_k`.
///
/// Spectral points are stored in ascending order; outcome index `k` always
/// refers to the `k`-th smallest distinct eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    operator: HermitianOperator,
    eigenvalues: Vec<f64>,
    projections: Vec<HermitianOperator>,
    degeneracies: Vec<usize>,
}

impl Observable {
    /// Spectral decomposition with the default merge tolerance.
    pub fn new(operator: HermitianOperator) -> Self {
        spectral_decompose(&operator, DEFAULT_DEGENERACY_TOL).expect("default tolerance is positive")
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        Self::new(HermitianOperator::from_diagonal(values))
    }

    pub fn pauli_z() -> Self {
        Self::new(HermitianOperator::new(ComplexMatrix::pauli_z()).expect("Hermitian"))
    }

    pub fn pauli_x() -> Self {
        Self::new(HermitianOperator::new(ComplexMatrix::pauli_x()).expect("Hermitian"))
    }

    #[inline]
    pub fn operator(&self) -> &HermitianOperator {
        &self.operator
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    /// Number of distinct spectral points `m`.
    #[inline]
    pub fn num_outcomes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn projections(&self) -> &[HermitianOperator] {
        &self.projections
    }

    pub fn projection(&self, k: usize) -> Result<&HermitianOperator> {
        self.projections.get(k).ok_or(Error::IndexOutOfRange {
            index: k,
            len: self.projections.len(),
        })
    }

    pub fn degeneracies(&self) -> &[usize] {
        &self.degeneracies
    }

    /// True iff every eigenvalue is simple, i.e. `⟨A⟩` is maximal abelian.
    pub fn is_nondegenerate(&self) -> bool {
        self.num_outcomes() == self.dim()
    }

    /// `Σ_k w_k P_k`.
    pub fn weighted_sum(&self, weights: &[f64]) -> DMatrix<C64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for (p, &w) in self.projections.iter().zip(weights) {
            out += p.as_matrix() * c(w, 0.0);
        }
        out
    }

    /// `Σ_k a_k P_k`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        ComplexMatrix::wrap(self.weighted_sum(&self.eigenvalues))
    }
}

/// Groups eigenvalues of `h` whose ascending neighbours lie within
/// `degeneracy_tol * max(1, spectral radius)` and builds one projection per group.
pub fn spectral_decompose(h: &HermitianOperator, degeneracy_tol: f64) -> Result<Observable> {
    if !(degeneracy_tol > 0.0) {
        return Err(Error::InvalidArgument("degeneracy tolerance must be positive"));
    }
    let (values, vectors) = h.eigen();
    let n = h.dim();
    let radius = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let tol = degeneracy_tol * radius.max(1.0);

    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || values[k] - values[k - 1] > tol {
            groups.push((start, k));
            start = k;
        }
    }

    let mut eigenvalues = Vec::with_capacity(groups.len());
    let mut projections = Vec::with_capacity(groups.len());
    let mut degeneracies = Vec::with_capacity(groups.len());
    for &(lo, hi) in &groups {
        let count = hi - lo;
        eigenvalues.push(values[lo..hi].iter().sum::<f64>() / count as f64);
        let block = vectors.columns(lo, count);
        projections.push(HermitianOperator::symmetrize(block * block.adjoint()));
        degeneracies.push(count);
    }

    Ok(Observable {
        operator: h.clone(),
        eigenvalues,
        projections,
        degeneracies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pauli_z_orders_spectrum_ascending() {
        let obs = Observable::pauli_z();
        assert_eq!(obs.eigenvalues(), &[-1.0, 1.0]);
        assert!(obs.projections()[0].matrix().max_abs_diff(&ComplexMatrix::diagonal(&[0.0, 1.0])) < 1e-14);
        assert!(obs.projections()[1].matrix().max_abs_diff(&ComplexMatrix::diagonal(&[1.0, 0.0])) < 1e-14);
    }

    #[test]
    fn identity_has_single_spectral_point() {
        let obs = Observable::new(HermitianOperator::identity(3));
        assert_eq!(obs.num_outcomes(), 1);
        assert_eq!(obs.degeneracies(), &[3]);
        assert!(obs.projections()[0].matrix().max_abs_diff(&ComplexMatrix::identity(3)) < 1e-14);
    }

    #[test]
    fn close_eigenvalues_are_merged() {
        let h = HermitianOperator::from_diagonal(&[2.0, 2.0 + 1e-12, 5.0]);
        let obs = spectral_decompose(&h, 1e-8).unwrap();
        assert_eq!(obs.num_outcomes(), 2);
        assert_eq!(obs.degeneracies(), &[2, 1]);
        assert!(!obs.is_nondegenerate());
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        assert!(spectral_decompose(&HermitianOperator::identity(2), 0.0).is_err());
    }

    #[test]
    fn projections_resolve_random_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 5;
        let g = crate::linalg::DensityMatrix::random(n, &mut rng);
        let obs = Observable::new(g.operator().clone());
        assert!(obs.is_nondegenerate());
        let mut sum = DMatrix::<C64>::zeros(n, n);
        for (j, pj) in obs.projections().iter().enumerate() {
            let p = pj.as_matrix();
            assert!(max_abs_diff(&(p * p), p) < 1e-10);
            for (k, pk) in obs.projections().iter().enumerate() {
                if j != k {
                    assert!((p * pk.as_matrix()).iter().all(|z| z.norm() < 1e-10));
                }
            }
            sum += p;
        }
        assert!(max_abs_diff(&sum, &DMatrix::identity(n, n)) < 1e-10);
        assert!(obs.reconstruct().max_abs_diff(g.matrix()) < 1e-10);
    }
}
