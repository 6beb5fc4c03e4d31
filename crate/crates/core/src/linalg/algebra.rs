//! Commutants of finite sets of matrices, computed as numerical nullspaces.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{c, frobenius, ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Singular values below `NULLSPACE_REL_TOL * max(σ_max, max ‖G‖_F)` count as zero.
pub const NULLSPACE_REL_TOL: f64 = 1e-9;

/// Trace-orthonormal basis (`⟨X, Y⟩ = Tr(X† Y)`) of a subspace of `M_n`.
#[derive(Clone, Debug)]
pub struct AlgebraBasis {
    matrix_dim: usize,
    basis: Vec<ComplexMatrix>,
}

impl AlgebraBasis {
    /// Size `n` of the matrices.
    pub fn matrix_dim(&self) -> usize {
        self.matrix_dim
    }

    /// Dimension of the subspace.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    /// `‖x - Π x‖_F` where `Π` is the orthogonal projection onto the span.
    pub fn projection_residual(&self, x: &ComplexMatrix) -> f64 {
        let mut residual = x.as_matrix().clone();
        for b in &self.basis {
            let coeff = b.as_matrix().dotc(x.as_matrix());
            residual -= b.as_matrix() * coeff;
        }
        frobenius(&residual)
    }

    pub fn contains(&self, x: &ComplexMatrix, tol: f64) -> bool {
        self.projection_residual(x) <= tol
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                worst = worst.max((a.as_matrix().dotc(b.as_matrix()) - target).norm());
            }
        }
        worst
    }

    /// Largest projection residual of an adjoint of a basis element.
    pub fn adjoint_closure_defect(&self) -> f64 {
        self.basis
            .iter()
            .map(|b| self.projection_residual(&b.adjoint()))
            .fold(0.0, f64::max)
    }
}

/// Superoperator of `X ↦ G X - X G` on row-major vectorized matrices.
fn commutator_superoperator(g: &DMatrix<C64>) -> DMatrix<C64> {
    let n = g.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    g.kronecker(&id) - id.kronecker(&g.transpose())
}

fn stack(top: DMatrix<C64>, bottom: &DMatrix<C64>) -> DMatrix<C64> {
    let rows = top.nrows();
    let cols = bottom.ncols();
    DMatrix::from_fn(rows + bottom.nrows(), cols, |i, j| {
        if i < rows {
            top[(i, j)]
        } else {
            bottom[(i - rows, j)]
        }
    })
}

/// Orthonormal basis of the common nullspace of `blocks`, each with `cols` columns.
///
/// `scale` floors the reference magnitude so that blocks which vanish up to
/// round-off do not turn their noise into a spurious rank.
fn common_nullspace<I>(blocks: I, cols: usize, scale: f64) -> Vec<nalgebra::DVector<C64>>
where
    I: IntoIterator<Item = DMatrix<C64>>,
{
    let mut acc = DMatrix::<C64>::zeros(0, cols);
    for block in blocks {
        acc = stack(acc, &block);
        if acc.nrows() > 4 * cols {
            acc = acc.qr().r();
        }
    }
    if acc.nrows() < cols {
        let pad = cols - acc.nrows();
        acc = stack(acc, &DMatrix::zeros(pad, cols));
    }
    let svd = acc.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sigma_max = svd.singular_values.iter().copied().fold(scale, f64::max);
    let threshold = NULLSPACE_REL_TOL * sigma_max;
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|&(_, &s)| sigma_max == 0.0 || s < threshold)
        .map(|(k, _)| v_t.row(k).adjoint())
        .collect()
}

fn check_generators(gens: &[ComplexMatrix]) -> Result<usize> {
    let first = gens
        .first()
        .ok_or(Error::InvalidArgument("empty generator list"))?;
    let n = first.dim();
    for g in gens {
        if g.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.dim(),
            });
        }
    }
    Ok(n)
}

/// `{X : [X, G] = 0 for all G in gens ∪ gens†}`.
pub fn commutant(gens: &[ComplexMatrix]) -> Result<AlgebraBasis> {
    let n = check_generators(gens)?;
    let blocks = gens.iter().flat_map(|g| {
        let g = g.as_matrix();
        [commutator_superoperator(g), commutator_superoperator(&g.adjoint())]
    });
    let scale = gens.iter().map(|g| g.frobenius_norm()).fold(0.0, f64::max);
    let basis = common_nullspace(blocks, n * n, scale)
        .into_iter()
        .map(|v| ComplexMatrix::wrap(DMatrix::from_row_slice(n, n, v.as_slice())))
        .collect();
    Ok(AlgebraBasis {
        matrix_dim: n,
        basis,
    })
}

/// The unital *-algebra generated by `gens`, as the commutant of the commutant.
pub fn double_commutant(gens: &[ComplexMatrix]) -> Result<AlgebraBasis> {
    let first = commutant(gens)?;
    commutant(first.basis())
}

/// Equal dimension and every element of `a` lies in `span(b)` within `tol`.
pub fn algebra_equal(a: &AlgebraBasis, b: &AlgebraBasis, tol: f64) -> bool {
    a.matrix_dim == b.matrix_dim
        && a.dim() == b.dim()
        && a.basis.iter().all(|x| b.projection_residual(x) <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> ComplexMatrix {
        ComplexMatrix::diagonal(v)
    }

    #[test]
    fn commutant_dimensions() {
        assert_eq!(commutant(&[ComplexMatrix::identity(3)]).unwrap().dim(), 9);
        assert_eq!(commutant(&[diag(&[1.0, 2.0, 3.0])]).unwrap().dim(), 3);
        assert_eq!(commutant(&[diag(&[1.0, 1.0, 2.0])]).unwrap().dim(), 5);
        let paulis = [ComplexMatrix::pauli_x(), ComplexMatrix::pauli_z()];
        assert_eq!(commutant(&paulis).unwrap().dim(), 1);
    }

    #[test]
    fn double_commutant_dimensions() {
        assert_eq!(double_commutant(&[diag(&[1.0, 2.0, 3.0])]).unwrap().dim(), 3);
        assert_eq!(double_commutant(&[diag(&[1.0, 1.0, 2.0])]).unwrap().dim(), 2);
        let x = double_commutant(&[ComplexMatrix::pauli_x()]).unwrap();
        assert_eq!(x.dim(), 2);
        assert!(x.contains(&ComplexMatrix::identity(2), 1e-9));
        assert!(x.contains(&ComplexMatrix::pauli_x(), 1e-9));
    }

    #[test]
    fn generator_errors() {
        assert!(matches!(commutant(&[]), Err(Error::InvalidArgument(_))));
        let gens = [ComplexMatrix::identity(2), ComplexMatrix::identity(3)];
        assert!(matches!(
            commutant(&gens),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn equality_is_basis_independent() {
        let diagonals = commutant(&[diag(&[1.0, 2.0])]).unwrap();
        assert!(algebra_equal(&diagonals, &diagonals, 1e-9));

        let s = 1.0 / libm::sqrt(2.0);
        let rotated = AlgebraBasis {
            matrix_dim: 2,
            basis: vec![
                diag(&[1.0, 1.0]).scale(c(s, 0.0)),
                diag(&[1.0, -1.0]).scale(c(0.0, s)),
            ],
        };
        assert!(rotated.orthonormality_defect() < 1e-15);
        assert!(algebra_equal(&rotated, &diagonals, 1e-9));

        let x_alg = double_commutant(&[ComplexMatrix::pauli_x()]).unwrap();
        assert!(!algebra_equal(&diagonals, &x_alg, 1e-8));
    }

    #[test]
    fn bases_are_orthonormal_and_adjoint_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = crate::linalg::DensityMatrix::random(3, &mut rng);
        let b = ComplexMatrix::diagonal(&[1.0, 1.0, 0.0]);
        let gens = [a.matrix().clone(), b];
        let alg = double_commutant(&gens).unwrap();
        assert!(alg.orthonormality_defect() < 1e-9);
        assert!(alg.adjoint_closure_defect() < 1e-9);
    }
}
