//! Decoherence and purification in a single equation on full density matrices:
//!
//! ```text
//! dρ/dt = L̂(ρ) + f̃(ρ) - ρ Tr f̃(ρ),    f̃(ρ) = a (λ ρ² - √μ_ext ρ √μ_ext)
//! ```
//!
//! with `λ` the largest `κ ∈ [0, 1]` such that `μ_ext - κ ρ` is positive and
//! `μ_ext` a state of the algebra `⟨A⟩`. For small `a` the Lindblad part
//! decoheres first and the nonlinear part then purifies on the simplex.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lindblad::{check_decoherence, LindbladSpec};
use crate::linalg::{
    c, frobenius, hermitian_eigen, hermitian_eigenvalues, restrict_to_algebra, trace_product,
    DensityMatrix, HermitianOperator, Observable, C64,
};
use crate::ode::{AdaptiveRk4, StepControl};
use crate::harness::{OutcomeStats, TrialRecord};
use crate::purification::{classify_raw, OutcomeStatus, DEFAULT_T_CAP_RATE_UNITS};
use crate::rng::{sample_simplex_uniform, RngStream};
use crate::simplex::SimplexPoint;

/// Eigenvalues of `μ_ext` at or below this are outside its support.
pub const SUPPORT_TOL: f64 = 1e-10;
/// Eigenvalue floor below which the state is clipped back to the PSD cone.
pub const PSD_FLOOR: f64 = -1e-8;
/// Default Frobenius distance to `P_i / d_i` that counts as converged.
pub const DEFAULT_COMBINED_CONV_TOL: f64 = 1e-6;
/// Largest deviation of `μ_ext` from `⟨A⟩` accepted at construction.
pub const ALGEBRA_MEMBERSHIP_TOL: f64 = 1e-12;

/// `μ_ext` split for the positivity test: `μ_Q^{-1/2}` on the support `Q` and
/// the projector `1 - Q`.
#[derive(Clone, Debug)]
struct SupportSplit {
    inv_sqrt: DMatrix<C64>,
    outside: Option<DMatrix<C64>>,
}

impl SupportSplit {
    fn from_eigen(values: &[f64], vectors: &DMatrix<C64>) -> Self {
        let n = values.len();
        let mut inv_sqrt = DMatrix::zeros(n, n);
        let mut outside = DMatrix::zeros(n, n);
        let mut has_outside = false;
        for (k, &v) in values.iter().enumerate() {
            let col = vectors.column(k);
            let proj = col * col.adjoint();
            if v > SUPPORT_TOL {
                inv_sqrt += proj * c(1.0 / libm::sqrt(v), 0.0);
            } else {
                outside += proj;
                has_outside = true;
            }
        }
        Self {
            inv_sqrt,
            outside: has_outside.then_some(outside),
        }
    }

    /// `min(1, 1 / λ_max(μ_Q^{-1/2} ρ μ_Q^{-1/2}))`, or `0` when `ρ` leaks
    /// out of the support.
    fn lambda(&self, rho: &DMatrix<C64>) -> f64 {
        if let Some(outside) = &self.outside {
            if trace_product(outside, rho).re > SUPPORT_TOL {
                return 0.0;
            }
        }
        let m = &self.inv_sqrt * rho * &self.inv_sqrt;
        let m = (&m + m.adjoint()) * c(0.5, 0.0);
        let top = hermitian_eigenvalues(&m).last().copied().unwrap_or(0.0);
        if top <= 1.0 {
            1.0
        } else {
            1.0 / top
        }
    }
}

/// Largest `κ ∈ [0, 1]` with `μ_ext - κ ρ` positive semidefinite.
pub fn lambda_max_matrix(rho: &DensityMatrix, mu_ext: &DensityMatrix) -> Result<f64> {
    if rho.dim() != mu_ext.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu_ext.dim(),
            found: rho.dim(),
        });
    }
    let (values, vectors) = hermitian_eigen(mu_ext.as_matrix());
    Ok(SupportSplit::from_eigen(&values, &vectors).lambda(rho.as_matrix()))
}

/// A decohering Lindblad generator, the observable it decoheres, an external
/// state in `⟨A⟩` and the purification rate.
#[derive(Clone, Debug)]
pub struct CombinedSpec {
    lindblad: LindbladSpec,
    obs: Observable,
    mu_ext_coords: SimplexPoint,
    mu_ext: DensityMatrix,
    sqrt_mu_ext: DMatrix<C64>,
    split: SupportSplit,
    a: f64,
}

impl CombinedSpec {
    /// `μ_ext = Σ_k (s_k / d_k) P_k`. Fails if the generator does not pass
    /// [`check_decoherence`] for `obs`.
    pub fn new(
        lindblad: LindbladSpec,
        obs: Observable,
        mu_ext: SimplexPoint,
        a: f64,
    ) -> Result<Self> {
        let report = check_decoherence(&lindblad, &obs)?;
        if !report.generated_algebra_matches {
            return Err(Error::DecoherenceViolated(
                "generated algebra differs from the observable algebra",
            ));
        }
        if !report.all_initial_converge {
            return Err(Error::DecoherenceViolated(
                "jump operators generate a smaller algebra than the full generator",
            ));
        }
        Self::assemble(lindblad, obs, mu_ext, a)
    }

    /// As [`CombinedSpec::new`] with `μ_ext` given as a matrix, which must lie
    /// in `⟨A⟩`.
    pub fn from_density(
        lindblad: LindbladSpec,
        obs: Observable,
        mu_ext: &DensityMatrix,
        a: f64,
    ) -> Result<Self> {
        if mu_ext.dim() != obs.dim() {
            return Err(Error::DimensionMismatch {
                expected: obs.dim(),
                found: mu_ext.dim(),
            });
        }
        let coords: Vec<f64> = obs
            .projections()
            .iter()
            .map(|p| trace_product(mu_ext.as_matrix(), p.as_matrix()).re)
            .collect();
        let lifted = lift(&obs, &coords);
        if frobenius(&(mu_ext.as_matrix() - lifted)) > ALGEBRA_MEMBERSHIP_TOL {
            return Err(Error::InvalidArgument(
                "external state is not in the observable algebra",
            ));
        }
        Self::new(lindblad, obs, SimplexPoint::new(coords)?, a)
    }

    fn assemble(lindblad: LindbladSpec, obs: Observable, mu_ext: SimplexPoint, a: f64) -> Result<Self> {
        if lindblad.dim() != obs.dim() {
            return Err(Error::DimensionMismatch {
                expected: obs.dim(),
                found: lindblad.dim(),
            });
        }
        if mu_ext.m() != obs.num_outcomes() {
            return Err(Error::DimensionMismatch {
                expected: obs.num_outcomes(),
                found: mu_ext.m(),
            });
        }
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::InvalidArgument("rate a must be non-negative"));
        }
        let d = obs.degeneracies();
        let weights: Vec<f64> = mu_ext
            .coords()
            .iter()
            .zip(d)
            .map(|(&s, &dk)| s / dk as f64)
            .collect();
        let sqrt_mu_ext = obs.weighted_sum(&weights.iter().map(|&w| libm::sqrt(w)).collect::<Vec<_>>());
        let matrix = lift(&obs, mu_ext.coords());
        let inv_sqrt: Vec<f64> = weights
            .iter()
            .map(|&w| if w > SUPPORT_TOL { 1.0 / libm::sqrt(w) } else { 0.0 })
            .collect();
        let outside: Vec<f64> = weights
            .iter()
            .map(|&w| if w > SUPPORT_TOL { 0.0 } else { 1.0 })
            .collect();
        let split = SupportSplit {
            inv_sqrt: obs.weighted_sum(&inv_sqrt),
            outside: outside.iter().any(|&o| o > 0.0).then(|| obs.weighted_sum(&outside)),
        };
        Ok(Self {
            mu_ext: DensityMatrix::renormalized(matrix),
            lindblad,
            obs,
            mu_ext_coords: mu_ext,
            sqrt_mu_ext,
            split,
            a,
        })
    }

    /// Same generator and observable with another external state; skips the
    /// algebra check already done by `self`.
    pub fn with_external(&self, mu_ext: SimplexPoint) -> Result<Self> {
        Self::assemble(self.lindblad.clone(), self.obs.clone(), mu_ext, self.a)
    }

    pub fn dim(&self) -> usize {
        self.obs.dim()
    }

    pub fn lindblad(&self) -> &LindbladSpec {
        &self.lindblad
    }

    pub fn observable(&self) -> &Observable {
        &self.obs
    }

    pub fn mu_ext(&self) -> &DensityMatrix {
        &self.mu_ext
    }

    pub fn mu_ext_coords(&self) -> &SimplexPoint {
        &self.mu_ext_coords
    }

    pub fn rate(&self) -> f64 {
        self.a
    }

    /// `ρ ↦ L̂(ρ) + f̃(ρ) - ρ Tr f̃(ρ)` on raw matrices.
    fn rhs_matrix(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = self.lindblad.apply(rho);
        if self.a == 0.0 {
            return out;
        }
        let lambda = self.split.lambda(rho);
        let f = (rho * rho * c(lambda, 0.0) - &self.sqrt_mu_ext * rho * &self.sqrt_mu_ext)
            * c(self.a, 0.0);
        let tr: C64 = (0..rho.nrows()).map(|i| f[(i, i)]).sum();
        out += f - rho * tr;
        out
    }
}

fn lift(obs: &Observable, coords: &[f64]) -> DMatrix<C64> {
    let weights: Vec<f64> = coords
        .iter()
        .zip(obs.degeneracies())
        .map(|(&s, &d)| s / d as f64)
        .collect();
    obs.weighted_sum(&weights)
}

fn check_state(rho: &DensityMatrix, spec: &CombinedSpec) -> Result<()> {
    if rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: rho.dim(),
        });
    }
    Ok(())
}

/// `dρ/dt` of the combined equation.
pub fn combined_rhs(rho: &DensityMatrix, spec: &CombinedSpec) -> Result<HermitianOperator> {
    check_state(rho, spec)?;
    Ok(HermitianOperator::symmetrize(spec.rhs_matrix(rho.as_matrix())))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CombinedOptions {
    pub conv_tol: f64,
    pub t_cap: f64,
    pub step: StepControl,
}

impl CombinedOptions {
    /// Time cap `1e6 / a` (or `1e6 / γ` scale when `a = 0`), initial step
    /// resolving the fastest generator rate.
    pub fn for_spec(spec: &CombinedSpec) -> Self {
        let scale = spec_rate_scale(spec);
        let slow = if spec.a > 0.0 { spec.a } else { scale };
        Self {
            conv_tol: DEFAULT_COMBINED_CONV_TOL,
            t_cap: DEFAULT_T_CAP_RATE_UNITS / slow,
            step: StepControl {
                abs_tol: 1e-11,
                rel_tol: 1e-8,
                initial_step: 0.01 / scale.max(spec.a),
                max_step: 50.0 / slow,
            },
        }
    }
}

/// A rough generator rate: the largest of `‖H‖_F` and `‖V_k‖_F²`.
fn spec_rate_scale(spec: &CombinedSpec) -> f64 {
    let h = spec.lindblad.hamiltonian().matrix().frobenius_norm();
    let v = spec
        .lindblad
        .jump_ops()
        .iter()
        .map(|v| {
            let f = v.frobenius_norm();
            f * f
        })
        .fold(0.0, f64::max);
    h.max(v).max(1e-12)
}

#[derive(Clone, Debug)]
pub struct CombinedOutcome {
    pub status: OutcomeStatus,
    pub final_state: DensityMatrix,
    pub t_elapsed: f64,
    pub steps: usize,
    /// Accepted steps after which the state was clipped back to the PSD cone.
    pub psd_repairs: usize,
}

/// Index `i` and distance `‖ρ - P_i / d_i‖_F` of the nearest target.
fn nearest_target(rho: &DMatrix<C64>, obs: &Observable) -> (usize, f64) {
    let purity = trace_product(rho, rho).re;
    obs.projections()
        .iter()
        .zip(obs.degeneracies())
        .enumerate()
        .map(|(i, (p, &d))| {
            let d = d as f64;
            let r = trace_product(rho, p.as_matrix()).re;
            (i, libm::sqrt((purity - 2.0 * r / d + 1.0 / d).max(0.0)))
        })
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Symmetrizes, clips eigenvalues below [`PSD_FLOOR`] and renormalizes the
/// trace. Returns whether clipping happened.
fn guard(y: &mut [C64], n: usize) -> bool {
    let m = DMatrix::from_column_slice(n, n, y);
    let h = HermitianOperator::symmetrize(m);
    let (values, vectors) = hermitian_eigen(h.as_matrix());
    let repaired = values.first().is_some_and(|&v| v < PSD_FLOOR);
    let out = if repaired {
        let mut acc = DMatrix::zeros(n, n);
        for (k, &v) in values.iter().enumerate() {
            if v > 0.0 {
                let col = vectors.column(k);
                acc += col * col.adjoint() * c(v, 0.0);
            }
        }
        acc
    } else {
        h.into_matrix().into_matrix()
    };
    let tr: f64 = (0..n).map(|i| out[(i, i)].re).sum();
    for (dst, src) in y.iter_mut().zip(out.iter()) {
        *dst = src / tr;
    }
    repaired
}

/// Integrates until `‖ρ - P_i / d_i‖_F ≤ conv_tol` for some `i` or `t_cap`.
pub fn integrate_combined(
    rho0: &DensityMatrix,
    spec: &CombinedSpec,
    options: &CombinedOptions,
) -> Result<CombinedOutcome> {
    check_state(rho0, spec)?;
    if !(options.conv_tol > 0.0) || !(options.t_cap > 0.0) {
        return Err(Error::InvalidArgument("conv_tol and t_cap must be positive"));
    }
    let n = spec.dim();
    let mut rhs = |y: &[C64], out: &mut [C64]| {
        let x = DMatrix::from_column_slice(n, n, y);
        out.copy_from_slice(spec.rhs_matrix(&x).as_slice());
    };
    let mut rk = AdaptiveRk4::new(n * n, options.step);
    let mut y: Vec<C64> = rho0.as_matrix().as_slice().to_vec();
    let mut slope = vec![C64::default(); n * n];
    let mut t = 0.0;
    let mut psd_repairs = 0;

    let status = loop {
        let x = DMatrix::from_column_slice(n, n, &y);
        let (i, dist) = nearest_target(&x, &spec.obs);
        if dist <= options.conv_tol {
            break OutcomeStatus::Converged(i);
        }
        if t >= options.t_cap {
            break OutcomeStatus::Unresolved;
        }
        rhs(&y, &mut slope);
        if slope.iter().all(|z| *z == C64::default()) {
            t = options.t_cap;
            break OutcomeStatus::Unresolved;
        }
        let remaining = options.t_cap - t;
        rk.advance(&mut rhs, &mut |_: &[C64]| true, &mut t, &mut y, remaining)?;
        if guard(&mut y, n) {
            psd_repairs += 1;
        }
    };

    Ok(CombinedOutcome {
        status,
        final_state: DensityMatrix::renormalized(DMatrix::from_column_slice(n, n, &y)),
        t_elapsed: t,
        steps: rk.accepted,
        psd_repairs,
    })
}

/// The combined flow sampled at each time in `times` (ascending, `≥ 0`).
pub fn evolve_combined(
    rho0: &DensityMatrix,
    spec: &CombinedSpec,
    times: &[f64],
    step: &StepControl,
) -> Result<Vec<DensityMatrix>> {
    check_state(rho0, spec)?;
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("sample times must be ascending and non-negative"));
    }
    let n = spec.dim();
    let mut rhs = |y: &[C64], out: &mut [C64]| {
        let x = DMatrix::from_column_slice(n, n, y);
        out.copy_from_slice(spec.rhs_matrix(&x).as_slice());
    };
    let mut rk = AdaptiveRk4::new(n * n, *step);
    let mut y: Vec<C64> = rho0.as_matrix().as_slice().to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let end_tol = 1e-12 * target.max(1.0);
        while target - t > end_tol {
            let remaining = target - t;
            rk.advance(&mut rhs, &mut |_: &[C64]| true, &mut t, &mut y, remaining)?;
            guard(&mut y, n);
        }
        out.push(DensityMatrix::renormalized(DMatrix::from_column_slice(n, n, &y)));
    }
    Ok(out)
}

/// A combined trial with its two-step prediction.
#[derive(Clone, Debug)]
pub struct CombinedTrial {
    /// Outcome against `classify(Tr(ρ0 P_k), μ_ext)`.
    pub record: TrialRecord,
    pub psd_repairs: usize,
}

/// One combined trial: `μ_ext` is the first uniform draw of stream
/// `(seed, trial)`.
pub fn run_combined_trial(
    rho0: &DensityMatrix,
    base: &CombinedSpec,
    trial: u64,
    seed: u64,
    options: &CombinedOptions,
) -> Result<CombinedTrial> {
    let mut rng = RngStream::new(seed, trial);
    let mu_ext = sample_simplex_uniform(base.obs.num_outcomes(), &mut rng)?;
    let restricted = restrict_to_algebra(rho0, &base.obs)?;
    let predicted = classify_raw(restricted.coords(), mu_ext.coords());
    let spec = base.with_external(mu_ext)?;
    let run = integrate_combined(rho0, &spec, options)?;
    let outcome = run.status.index();
    Ok(CombinedTrial {
        record: TrialRecord {
            trial,
            outcome,
            predicted,
            t_converged: outcome.map(|_| run.t_elapsed),
            steps: run.steps,
        },
        psd_repairs: run.psd_repairs,
    })
}

/// Outcome counts against the Born targets `Tr(ρ0 P_i)`.
pub fn combined_stats(
    rho0: &DensityMatrix,
    obs: &Observable,
    trials: &[CombinedTrial],
) -> Result<OutcomeStats> {
    let born = restrict_to_algebra(rho0, obs)?.into_coords();
    let records: Vec<TrialRecord> = trials.iter().map(|t| t.record.clone()).collect();
    OutcomeStats::from_records(born, &records)
}

/// Sequential combined experiment.
pub fn combined_experiment(
    rho0: &DensityMatrix,
    base: &CombinedSpec,
    trials: usize,
    seed: u64,
    options: &CombinedOptions,
) -> Result<OutcomeStats> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1"));
    }
    let runs = (0..trials as u64)
        .map(|t| run_combined_trial(rho0, base, t, seed, options))
        .collect::<Result<Vec<_>>>()?;
    combined_stats(rho0, &base.obs, &runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexMatrix;
    use crate::purification::purification_rhs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // ascending eigenvalues keep outcome k on basis state k
    fn qubit_obs() -> Observable {
        Observable::from_diagonal(&[0.0, 1.0])
    }

    fn dephasing_spec(mu_ext: &[f64], a: f64) -> CombinedSpec {
        let obs = qubit_obs();
        let l = LindbladSpec::dephasing(&obs, &[1.0, 1.0]).unwrap();
        CombinedSpec::new(l, obs, SimplexPoint::new(mu_ext.to_vec()).unwrap(), a).unwrap()
    }

    fn plus() -> DensityMatrix {
        DensityMatrix::uniform_superposition(2)
    }

    #[test]
    fn lambda_matrix_examples() {
        let rho = DensityMatrix::from_diagonal(&[0.5, 0.5]).unwrap();
        let mu = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        assert!((lambda_max_matrix(&rho, &mu).unwrap() - 0.6).abs() < 1e-12);
        assert!((lambda_max_matrix(&mu, &mu).unwrap() - 1.0).abs() < 1e-12);
        let e0 = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(lambda_max_matrix(&plus(), &e0).unwrap(), 0.0);
    }

    #[test]
    fn lambda_matrix_is_sharp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let rho = DensityMatrix::random(3, &mut rng);
            let mu = DensityMatrix::random(3, &mut rng);
            let l = lambda_max_matrix(&rho, &mu).unwrap();
            let min_eig = |k: f64| {
                HermitianOperator::symmetrize(mu.as_matrix() - rho.as_matrix() * c(k, 0.0)).min_eigenvalue()
            };
            assert!(min_eig(l) >= -1e-9);
            if l < 1.0 {
                assert!(min_eig(l + 1e-7) < 0.0);
            }
        }
    }

    #[test]
    fn coincident_maximally_mixed_is_fixed() {
        let spec = dephasing_spec(&[0.5, 0.5], 1.0);
        let f = combined_rhs(&DensityMatrix::maximally_mixed(2), &spec).unwrap();
        assert!(f.matrix().frobenius_norm() < 1e-15);
    }

    #[test]
    fn zero_rate_is_pure_lindblad() {
        let spec = dephasing_spec(&[0.3, 0.7], 0.0);
        let f = combined_rhs(&plus(), &spec).unwrap();
        let g = crate::lindblad::lindblad_rhs(&plus(), spec.lindblad()).unwrap();
        assert_eq!(f.as_matrix(), g.as_matrix());
    }

    #[test]
    fn diagonal_sector_reduces_to_simplex_flow() {
        let obs = Observable::from_diagonal(&[1.0, 2.0, 3.0]);
        let l = LindbladSpec::dephasing(&obs, &[1.0, 1.0, 1.0]).unwrap();
        let ext = SimplexPoint::new(vec![0.2, 0.3, 0.5]).unwrap();
        let spec = CombinedSpec::new(l, obs.clone(), ext.clone(), 1.5).unwrap();
        let r = [0.6, 0.1, 0.3];
        let rho = DensityMatrix::from_diagonal(&r).unwrap();
        let f = combined_rhs(&rho, &spec).unwrap();
        let g = purification_rhs(&SimplexPoint::new(r.to_vec()).unwrap(), &ext, 1.5).unwrap();
        for k in 0..3 {
            assert!((f.as_matrix()[(k, k)].re - g[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_decohering_generators_and_foreign_states() {
        let obs = qubit_obs();
        let bad = LindbladSpec::new(
            HermitianOperator::new(ComplexMatrix::pauli_x()).unwrap(),
            vec![ComplexMatrix::pauli_z()],
        )
        .unwrap();
        let ext = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            CombinedSpec::new(bad, obs.clone(), ext, 1.0),
            Err(Error::DecoherenceViolated(_))
        ));
        let l = LindbladSpec::dephasing(&obs, &[1.0, 1.0]).unwrap();
        assert!(CombinedSpec::from_density(l.clone(), obs.clone(), &plus(), 1.0).is_err());
        let diag = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        let spec = CombinedSpec::from_density(l, obs, &diag, 1.0).unwrap();
        assert_eq!(spec.mu_ext_coords().coords(), &[0.3, 0.7]);
    }

    #[test]
    fn pure_target_is_immediate() {
        let spec = dephasing_spec(&[0.3, 0.7], 1.0);
        let rho = DensityMatrix::from_diagonal(&[0.0, 1.0]).unwrap();
        let out = integrate_combined(&rho, &spec, &CombinedOptions::for_spec(&spec)).unwrap();
        assert_eq!(out.status, OutcomeStatus::Converged(1));
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn diagonal_start_matches_simplex_outcome() {
        let spec = dephasing_spec(&[0.6, 0.4], 1.0);
        let rho = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        let out = integrate_combined(&rho, &spec, &CombinedOptions::for_spec(&spec)).unwrap();
        // s_0 / r_0 = 2 > s_1 / r_1 ≈ 0.57, so the flow ends at index 1
        assert_eq!(out.status, OutcomeStatus::Converged(1));
        assert!((out.final_state.operator().trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_experiment_is_reproducible() {
        let spec = dephasing_spec(&[0.5, 0.5], 0.5);
        let opts = CombinedOptions::for_spec(&spec);
        let a = combined_experiment(&plus(), &spec, 20, 3, &opts).unwrap();
        let b = combined_experiment(&plus(), &spec, 20, 3, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.born, vec![0.5, 0.5]);
        assert_eq!(a.counts.iter().sum::<usize>() + a.unresolved, 20);
    }

    #[test]
    fn degenerate_block_targets_normalized_projection() {
        let obs = Observable::from_diagonal(&[1.0, 1.0, 2.0]);
        let l = LindbladSpec::dephasing(&obs, &[1.0, 1.0]).unwrap();
        let spec = CombinedSpec::new(l, obs, SimplexPoint::new(vec![0.5, 0.5]).unwrap(), 1.0).unwrap();
        let rho = DensityMatrix::from_diagonal(&[0.4, 0.4, 0.2]).unwrap();
        let out = integrate_combined(&rho, &spec, &CombinedOptions::for_spec(&spec)).unwrap();
        assert_eq!(out.status, OutcomeStatus::Converged(0));
        let target = DensityMatrix::from_diagonal(&[0.5, 0.5, 0.0]).unwrap();
        assert!(out.final_state.frobenius_distance(&target) <= 1e-6);
    }
}
