//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Everything here works on `n x n` matrices with `n` in the single or low
//! double digits. Eigen- and singular-value decompositions are delegated to
//! `nalgebra`; the types in this module carry the invariants the dynamics rely
//! on (Hermiticity, unit trace, positivity, orthogonal spectral projections).

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

mod algebra;
mod measurement;
mod spectral;

pub use algebra::{algebra_equal, commutant, double_commutant, AlgebraBasis, NULLSPACE_REL_TOL};
pub use measurement::{
    conditional_expectation, cp_restriction_demo, partial_trace_2, restrict_to_algebra,
    selective_map, ZERO_PROBABILITY_TOL,
};
pub use spectral::{spectral_decompose, Observable, DEFAULT_DEGENERACY_TOL};

pub type C64 = Complex64;

/// Largest anti-Hermitian part tolerated (and removed) when building a [`HermitianOperator`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace and positivity tolerance for [`DensityMatrix`].
pub const DENSITY_TOL: f64 = 1e-10;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Square complex matrix, `dim >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<C64>,
}

impl ComplexMatrix {
    /// Builds an `n x n` matrix from `n^2` entries in row-major order.
    pub fn from_row_major(dim: usize, entries: &[C64]) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::BadShape {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self {
            inner: DMatrix::from_row_slice(dim, dim, entries),
        })
    }

    /// Real matrix from row-major entries.
    pub fn from_real_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        let entries: Vec<C64> = entries.iter().map(|&x| c(x, 0.0)).collect();
        Self::from_row_major(dim, &entries)
    }

    pub fn from_matrix(inner: DMatrix<C64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.nrows() != inner.ncols() {
            return Err(Error::BadShape {
                expected: inner.nrows() * inner.nrows(),
                found: inner.len(),
            });
        }
        Ok(Self { inner })
    }

    pub(crate) fn wrap(inner: DMatrix<C64>) -> Self {
        debug_assert!(inner.is_square() && inner.nrows() > 0);
        Self { inner }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::wrap(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::wrap(DMatrix::identity(dim, dim))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self::wrap(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(values[i], 0.0)
            } else {
                C64::default()
            }
        }))
    }

    pub fn pauli_x() -> Self {
        Self::wrap(DMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        ))
    }

    pub fn pauli_y() -> Self {
        Self::wrap(DMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
        ))
    }

    pub fn pauli_z() -> Self {
        Self::diagonal(&[1.0, -1.0])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.inner[(row, col)]
    }

    #[inline]
    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.inner
    }

    pub fn to_row_major(&self) -> Vec<C64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::wrap(self.inner.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.inner.trace()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self::wrap(self.inner.map(|z| z * factor))
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.inner)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs_diff(&self.inner, &other.inner)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self::wrap(&self.inner * &other.inner - &other.inner * &self.inner)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self::wrap(self.inner.kronecker(&other.inner))
    }

    /// `max |U†U - 1|` entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        max_abs_diff(&(self.inner.adjoint() * &self.inner), &DMatrix::identity(n, n))
    }

    /// Largest entrywise modulus of the anti-Hermitian part times two.
    pub fn hermiticity_defect(&self) -> f64 {
        max_abs_diff(&self.inner, &self.inner.adjoint())
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::wrap(&self.inner * &rhs.inner)
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::wrap(&self.inner + &rhs.inner)
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::wrap(&self.inner - &rhs.inner)
    }
}

/// Self-adjoint matrix. Stored exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    /// Accepts `m` if `max |m - m†| <= 1e-12` and stores `(m + m†)/2`.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let deviation = m.hermiticity_defect();
        if !(deviation <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self::symmetrize(m.into_matrix()))
    }

    pub(crate) fn symmetrize(m: DMatrix<C64>) -> Self {
        let h = (&m + m.adjoint()) * c(0.5, 0.0);
        Self {
            matrix: ComplexMatrix::wrap(h),
        }
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        Self {
            matrix: ComplexMatrix::diagonal(values),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::zeros(dim),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    #[inline]
    pub fn as_matrix(&self) -> &DMatrix<C64> {
        self.matrix.as_matrix()
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Eigenvalues in ascending order with the matching orthonormal eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<C64>) {
        hermitian_eigen(self.as_matrix())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(self.as_matrix())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("dim >= 1")
    }
}

/// Positive semidefinite, unit-trace Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    operator: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(operator: HermitianOperator) -> Result<Self> {
        let trace = operator.trace();
        if !((trace - 1.0).abs() <= DENSITY_TOL) {
            return Err(Error::InvalidTrace { trace });
        }
        let min_eigenvalue = operator.min_eigenvalue();
        if !(min_eigenvalue >= -DENSITY_TOL) {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(Self { operator })
    }

    pub fn from_matrix(m: ComplexMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    /// Wraps an operator the caller has already normalized.
    pub(crate) fn trusted(operator: HermitianOperator) -> Self {
        Self { operator }
    }

    /// Symmetrizes and rescales to unit trace; no positivity check.
    pub(crate) fn renormalized(m: DMatrix<C64>) -> Self {
        let h = HermitianOperator::symmetrize(m);
        let tr = h.trace();
        let m = h.into_matrix().into_matrix() * c(1.0 / tr, 0.0);
        Self {
            operator: HermitianOperator {
                matrix: ComplexMatrix::wrap(m),
            },
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let w = 1.0 / dim as f64;
        Self::trusted(HermitianOperator::from_diagonal(&alloc::vec![w; dim]))
    }

    pub fn from_diagonal(weights: &[f64]) -> Result<Self> {
        Self::new(HermitianOperator::from_diagonal(weights))
    }

    /// Pure state `|ψ⟩⟨ψ|` after normalizing `ψ`.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::BadShape {
                expected: 1,
                found: 0,
            });
        }
        let norm2: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::InvalidArgument("state vector has zero norm"));
        }
        let n = amplitudes.len();
        let m = DMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj() / norm2);
        Ok(Self::renormalized(m))
    }

    /// Equal superposition of all basis states.
    pub fn uniform_superposition(dim: usize) -> Self {
        Self::pure(&alloc::vec![c(1.0, 0.0); dim]).expect("nonzero vector")
    }

    /// Random full-rank state `G G† / Tr(G G†)` from a complex Ginibre matrix.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let g = DMatrix::from_fn(dim, dim, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c(re, im)
        });
        Self::renormalized(&g * g.adjoint())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    #[inline]
    pub fn operator(&self) -> &HermitianOperator {
        &self.operator
    }

    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix {
        self.operator.matrix()
    }

    #[inline]
    pub fn as_matrix(&self) -> &DMatrix<C64> {
        self.operator.as_matrix()
    }

    /// `Tr(ρ X)`.
    pub fn expectation(&self, x: &ComplexMatrix) -> C64 {
        trace_product(self.as_matrix(), x.as_matrix())
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        trace_product(self.as_matrix(), self.as_matrix()).re
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        frobenius(&(self.as_matrix() - other.as_matrix()))
    }
}

pub(crate) fn frobenius(m: &DMatrix<C64>) -> f64 {
    libm::sqrt(m.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

pub(crate) fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `Tr(A B)` without forming the product.
pub(crate) fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = C64::default();
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut values: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hermitian_construction_symmetrizes_small_drift() {
        let m = ComplexMatrix::from_row_major(
            2,
            &[c(1.0, 0.0), c(0.5, 1e-13), c(0.5, 0.0), c(2.0, 0.0)],
        )
        .unwrap();
        let h = HermitianOperator::new(m).unwrap();
        assert_eq!(h.matrix().hermiticity_defect(), 0.0);
    }

    #[test]
    fn hermitian_construction_rejects_large_asymmetry() {
        let m = ComplexMatrix::from_real_row_major(2, &[1.0, 0.5, 0.4, 2.0]).unwrap();
        assert!(matches!(
            HermitianOperator::new(m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn bad_shapes_are_rejected() {
        assert!(ComplexMatrix::from_row_major(0, &[]).is_err());
        assert!(ComplexMatrix::from_real_row_major(2, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn density_validation() {
        assert!(matches!(
            DensityMatrix::from_diagonal(&[0.5, 0.6]),
            Err(Error::InvalidTrace { .. })
        ));
        assert!(matches!(
            DensityMatrix::from_diagonal(&[1.5, -0.5]),
            Err(Error::NotPositive { .. })
        ));
        let rho = DensityMatrix::uniform_superposition(2);
        assert!((rho.purity() - 1.0).abs() < 1e-14);
        assert!((rho.get_entry(0, 1) - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn random_states_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..6 {
            let rho = DensityMatrix::random(n, &mut rng);
            assert!(DensityMatrix::new(rho.operator().clone()).is_ok());
        }
    }

    impl DensityMatrix {
        fn get_entry(&self, i: usize, j: usize) -> C64 {
            self.matrix().get(i, j)
        }
    }
}
