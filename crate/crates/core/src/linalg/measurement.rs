//! Measurement maps on density matrices and the bipartite restriction demo.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{c, trace_product, ComplexMatrix, DensityMatrix, HermitianOperator, Observable};
use crate::error::{Error, Result};
use crate::simplex::SimplexPoint;

/// Outcome probabilities at or below this value cannot be conditioned on.
pub const ZERO_PROBABILITY_TOL: f64 = 1e-12;

const UNITARY_TOL: f64 = 1e-10;
const RESTRICTION_NEGATIVE_TOL: f64 = 1e-10;

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// State after a selective measurement with outcome `k`: `P_k ρ P_k / Tr(ρ P_k)`.
pub fn selective_map(rho: &DensityMatrix, obs: &Observable, k: usize) -> Result<DensityMatrix> {
    check_dim(obs.dim(), rho.dim())?;
    let p = obs.projection(k)?.as_matrix();
    let probability = trace_product(rho.as_matrix(), p).re;
    if !(probability > ZERO_PROBABILITY_TOL) {
        return Err(Error::ZeroProbability {
            outcome: k,
            probability,
        });
    }
    Ok(DensityMatrix::renormalized(p * rho.as_matrix() * p))
}

/// Non-selective measurement `Φ_A(ρ) = Σ_k P_k ρ P_k`.
pub fn conditional_expectation(rho: &DensityMatrix, obs: &Observable) -> Result<DensityMatrix> {
    check_dim(obs.dim(), rho.dim())?;
    Ok(DensityMatrix::trusted(HermitianOperator::symmetrize(pinch(
        rho.as_matrix(),
        obs,
    ))))
}

pub(crate) fn pinch(m: &DMatrix<super::C64>, obs: &Observable) -> DMatrix<super::C64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for p in obs.projections() {
        let p = p.as_matrix();
        out += p * m * p;
    }
    out
}

/// Coordinates `r_k = Tr(ρ P_k)` of the restriction of `ρ` to `⟨A⟩`.
pub fn restrict_to_algebra(rho: &DensityMatrix, obs: &Observable) -> Result<SimplexPoint> {
    check_dim(obs.dim(), rho.dim())?;
    let coords: Vec<f64> = obs
        .projections()
        .iter()
        .map(|p| trace_product(rho.as_matrix(), p.as_matrix()).re)
        .collect();
    if coords.iter().any(|&r| r < -RESTRICTION_NEGATIVE_TOL) {
        return Err(Error::Numerical("negative outcome weight"));
    }
    Ok(SimplexPoint::projected(coords))
}

/// Partial trace over the second tensor factor of `H1 ⊗ H2`.
pub fn partial_trace_2(m: &ComplexMatrix, dims: (usize, usize)) -> Result<ComplexMatrix> {
    let (n1, n2) = dims;
    if n1 == 0 || n2 == 0 || n1 * n2 != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: n1 * n2,
            found: m.dim(),
        });
    }
    let inner = m.as_matrix();
    let out = DMatrix::from_fn(n1, n1, |i, j| {
        (0..n2).fold(c(0.0, 0.0), |acc, k| acc + inner[(i * n2 + k, j * n2 + k)])
    });
    Ok(ComplexMatrix::wrap(out))
}

/// `Tr_2[U ρ12 U†]`: the reduced dynamics of the first factor.
///
/// For non-product `U` the result depends on the extension `ρ12`, not only on
/// `Tr_2 ρ12`.
pub fn cp_restriction_demo(
    u: &ComplexMatrix,
    rho12: &DensityMatrix,
    dims: (usize, usize),
) -> Result<DensityMatrix> {
    check_dim(u.dim(), rho12.dim())?;
    let deviation = u.unitarity_defect();
    if !(deviation <= UNITARY_TOL) {
        return Err(Error::NotUnitary { deviation });
    }
    let u = u.as_matrix();
    let evolved = ComplexMatrix::wrap(u * rho12.as_matrix() * u.adjoint());
    let reduced = partial_trace_2(&evolved, dims)?;
    Ok(DensityMatrix::trusted(HermitianOperator::symmetrize(
        reduced.into_matrix(),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sigma_z() -> Observable {
        Observable::pauli_z()
    }

    #[test]
    fn selective_map_on_maximally_mixed() {
        let rho = DensityMatrix::maximally_mixed(2);
        // outcome 1 is eigenvalue +1, projector diag(1, 0)
        let out = selective_map(&rho, &sigma_z(), 1).unwrap();
        assert!(out.matrix().max_abs_diff(&ComplexMatrix::diagonal(&[1.0, 0.0])) < 1e-15);
    }

    #[test]
    fn selective_map_on_plus_state() {
        let plus = DensityMatrix::uniform_superposition(2);
        let down = selective_map(&plus, &sigma_z(), 0).unwrap();
        let up = selective_map(&plus, &sigma_z(), 1).unwrap();
        assert!(down.matrix().max_abs_diff(&ComplexMatrix::diagonal(&[0.0, 1.0])) < 1e-14);
        assert!(up.matrix().max_abs_diff(&ComplexMatrix::diagonal(&[1.0, 0.0])) < 1e-14);
    }

    #[test]
    fn selective_map_zero_probability() {
        let obs = Observable::from_diagonal(&[1.0, 2.0, 3.0]);
        let rho = DensityMatrix::from_diagonal(&[1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            selective_map(&rho, &obs, 1),
            Err(Error::ZeroProbability { outcome: 1, .. })
        ));
        assert!(matches!(
            selective_map(&rho, &obs, 7),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn conditional_expectation_erases_coherences() {
        let rho = DensityMatrix::uniform_superposition(2);
        let out = conditional_expectation(&rho, &sigma_z()).unwrap();
        assert!(out.matrix().max_abs_diff(&ComplexMatrix::diagonal(&[0.5, 0.5])) < 1e-15);
    }

    #[test]
    fn conditional_expectation_fixes_commutant() {
        let obs = Observable::from_diagonal(&[1.0, 1.0, 2.0]);
        let m = ComplexMatrix::from_row_major(
            3,
            &[
                c(0.3, 0.0), c(0.1, 0.05), c(0.0, 0.0),
                c(0.1, -0.05), c(0.3, 0.0), c(0.0, 0.0),
                c(0.0, 0.0), c(0.0, 0.0), c(0.4, 0.0),
            ],
        )
        .unwrap();
        let rho = DensityMatrix::from_matrix(m).unwrap();
        let out = conditional_expectation(&rho, &obs).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn conditional_expectation_block_pinch() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = DensityMatrix::random(4, &mut rng);
        let obs = Observable::from_diagonal(&[1.0, 1.0, 2.0, 3.0]);
        let out = conditional_expectation(&rho, &obs).unwrap();
        let block = [0, 0, 1, 2];
        for i in 0..4 {
            for j in 0..4 {
                let expected = if block[i] == block[j] {
                    rho.matrix().get(i, j)
                } else {
                    C64::default()
                };
                assert!((out.matrix().get(i, j) - expected).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn restriction_weights() {
        let obs = Observable::from_diagonal(&[0.0, 0.0, 1.0, 5.0]);
        let r = restrict_to_algebra(&DensityMatrix::maximally_mixed(4), &obs).unwrap();
        assert_eq!(r.coords(), &[0.5, 0.25, 0.25]);

        let p0 = obs.projections()[0].clone();
        let rho = DensityMatrix::renormalized(p0.into_matrix().into_matrix());
        let r = restrict_to_algebra(&rho, &obs).unwrap();
        assert_eq!(r.coords(), &[1.0, 0.0, 0.0]);

        let m = ComplexMatrix::from_row_major(
            2,
            &[c(0.7, 0.0), c(0.2, 0.3), c(0.2, -0.3), c(0.3, 0.0)],
        )
        .unwrap();
        let rho = DensityMatrix::from_matrix(m).unwrap();
        // ascending order: eigenvalue -1 (projector on |1>) first
        let r = restrict_to_algebra(&rho, &sigma_z()).unwrap();
        assert!((r.get(0) - 0.3).abs() < 1e-15 && (r.get(1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn partial_trace_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DensityMatrix::random(2, &mut rng);
        let b = DensityMatrix::random(3, &mut rng);
        let prod = a.matrix().kron(b.matrix());
        let reduced = partial_trace_2(&prod, (2, 3)).unwrap();
        assert!(reduced.max_abs_diff(a.matrix()) < 1e-14);

        let s = 1.0 / libm::sqrt(2.0);
        let bell = DensityMatrix::pure(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap();
        let reduced = partial_trace_2(bell.matrix(), (2, 2)).unwrap();
        assert!(reduced.max_abs_diff(&ComplexMatrix::diagonal(&[0.5, 0.5])) < 1e-15);

        let mixed = DensityMatrix::maximally_mixed(6);
        let reduced = partial_trace_2(mixed.matrix(), (3, 2)).unwrap();
        assert!(reduced.max_abs_diff(&ComplexMatrix::diagonal(&[1.0 / 3.0; 3])) < 1e-15);

        assert!(matches!(
            partial_trace_2(mixed.matrix(), (4, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn cnot() -> ComplexMatrix {
        ComplexMatrix::from_real_row_major(
            4,
            &[
                1.0, 0.0, 0.0, 0.0,
                0.0, 1.0, 0.0, 0.0,
                0.0, 0.0, 0.0, 1.0,
                0.0, 0.0, 1.0, 0.0,
            ],
        )
        .unwrap()
    }

    #[test]
    fn restriction_identity_and_product_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho12 = DensityMatrix::random(4, &mut rng);
        let reduced = partial_trace_2(rho12.matrix(), (2, 2)).unwrap();
        let out = cp_restriction_demo(&ComplexMatrix::identity(4), &rho12, (2, 2)).unwrap();
        assert!(out.matrix().max_abs_diff(&reduced) < 1e-14);

        let h = ComplexMatrix::from_real_row_major(2, &[1.0, 1.0, 1.0, -1.0])
            .unwrap()
            .scale(c(1.0 / libm::sqrt(2.0), 0.0));
        let u2 = ComplexMatrix::from_row_major(2, &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let out = cp_restriction_demo(&h.kron(&u2), &rho12, (2, 2)).unwrap();
        let expected = &(&h * &reduced) * &h.adjoint();
        assert!(out.matrix().max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn cnot_distinguishes_extensions_of_the_same_marginal() {
        let product = DensityMatrix::maximally_mixed(2)
            .matrix()
            .kron(&ComplexMatrix::diagonal(&[1.0, 0.0]));
        let product = DensityMatrix::from_matrix(product).unwrap();
        let s = 1.0 / libm::sqrt(2.0);
        let bell = DensityMatrix::pure(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap();
        // both extend 1/2
        assert!(partial_trace_2(product.matrix(), (2, 2)).unwrap()
            .max_abs_diff(&partial_trace_2(bell.matrix(), (2, 2)).unwrap()) < 1e-15);

        let from_product = cp_restriction_demo(&cnot(), &product, (2, 2)).unwrap();
        let from_bell = cp_restriction_demo(&cnot(), &bell, (2, 2)).unwrap();
        assert!(from_product.matrix().max_abs_diff(&ComplexMatrix::diagonal(&[0.5, 0.5])) < 1e-15);
        let plus = DensityMatrix::uniform_superposition(2);
        assert!(from_bell.matrix().max_abs_diff(plus.matrix()) < 1e-15);
    }

    #[test]
    fn non_unitary_is_rejected() {
        let rho = DensityMatrix::maximally_mixed(4);
        let m = ComplexMatrix::diagonal(&[1.0, 1.0, 1.0, 0.5]);
        assert!(matches!(
            cp_restriction_demo(&m, &rho, (2, 2)),
            Err(Error::NotUnitary { .. })
        ));
    }
}
