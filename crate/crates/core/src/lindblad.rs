//! Schrödinger-picture Lindblad evolution and the algebraic decoherence test.
//!
//! The generator is
//!
//! ```text
//! L̂(ρ) = -i[H, ρ] + Σ_k (V_k ρ V_k† - ½{V_k† V_k, ρ})
//! ```
//!
//! A spec decoheres an observable `A` (every state flows to `Φ_A(ρ0)`) when
//! the algebra generated by `{H, V_k, V_k†}` equals `⟨A⟩` and also equals the
//! algebra generated by the jump operators alone. [`check_decoherence`] tests
//! both equalities numerically through commutants.

use alloc::vec::Vec;

use nalgebra::{DMatrix, Schur};

use crate::error::{Error, Result};
use crate::linalg::{
    algebra_equal, c, conditional_expectation, double_commutant, frobenius, AlgebraBasis,
    ComplexMatrix, DensityMatrix, HermitianOperator, Observable, C64,
};
use crate::ode::Rk4;

/// Tolerance used when comparing generated algebras.
pub const ALGEBRA_TOL: f64 = 1e-8;
/// Default tolerance for classifying superoperator eigenvalues as zero.
pub const SPECTRUM_TOL: f64 = 1e-9;
/// Largest trace drift accepted from a single RK4 step.
pub const TRACE_DRIFT_TOL: f64 = 1e-9;
const MAX_HALVINGS: u32 = 20;

/// Hamiltonian and jump operators of a Lindblad generator.
#[derive(Clone, Debug)]
pub struct LindbladSpec {
    hamiltonian: HermitianOperator,
    jump_ops: Vec<ComplexMatrix>,
    jump_adjoints: Vec<DMatrix<C64>>,
    damping: DMatrix<C64>,
}

impl LindbladSpec {
    pub fn new(hamiltonian: HermitianOperator, jump_ops: Vec<ComplexMatrix>) -> Result<Self> {
        let n = hamiltonian.dim();
        for v in &jump_ops {
            if v.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.dim(),
                });
            }
        }
        let jump_adjoints: Vec<DMatrix<C64>> =
            jump_ops.iter().map(|v| v.as_matrix().adjoint()).collect();
        let mut damping = DMatrix::zeros(n, n);
        for (v, vd) in jump_ops.iter().zip(&jump_adjoints) {
            damping += vd * v.as_matrix();
        }
        Ok(Self {
            hamiltonian,
            jump_ops,
            jump_adjoints,
            damping,
        })
    }

    /// `H = A`, `V_k = √γ_k P_k`. Zero rates contribute no jump operator.
    pub fn dephasing(obs: &Observable, rates: &[f64]) -> Result<Self> {
        Self::new(obs.operator().clone(), dephasing_jumps(obs, rates)?)
    }

    /// `H = 0`, `V_k = √γ_k P_k`.
    pub fn pure_dephasing(obs: &Observable, rates: &[f64]) -> Result<Self> {
        Self::new(HermitianOperator::zeros(obs.dim()), dephasing_jumps(obs, rates)?)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    pub fn jump_ops(&self) -> &[ComplexMatrix] {
        &self.jump_ops
    }

    /// `L̂(X)` for an arbitrary matrix `X`.
    pub fn apply(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let h = self.hamiltonian.as_matrix();
        let mut out = (h * x - x * h) * c(0.0, -1.0);
        for (v, vd) in self.jump_ops.iter().zip(&self.jump_adjoints) {
            out += v.as_matrix() * x * vd;
        }
        out -= (&self.damping * x + x * &self.damping) * c(0.5, 0.0);
        out
    }

    /// Heisenberg-picture generator `L(X) = i[H, X] + Σ (V† X V - ½{V†V, X})`,
    /// the trace-adjoint of [`apply`](Self::apply).
    pub fn apply_heisenberg(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let h = self.hamiltonian.as_matrix();
        let mut out = (h * x - x * h) * c(0.0, 1.0);
        for (v, vd) in self.jump_ops.iter().zip(&self.jump_adjoints) {
            out += vd * x * v.as_matrix();
        }
        out -= (&self.damping * x + x * &self.damping) * c(0.5, 0.0);
        out
    }

    /// Matrix of `L̂` on row-major vectorized matrices, i.e. in the
    /// trace-orthonormal basis of matrix units `E_jk`.
    pub fn superoperator(&self) -> DMatrix<C64> {
        let n = self.dim();
        let id = DMatrix::<C64>::identity(n, n);
        let h = self.hamiltonian.as_matrix();
        let mut s = (h.kronecker(&id) - id.kronecker(&h.transpose())) * c(0.0, -1.0);
        for v in &self.jump_ops {
            let v = v.as_matrix();
            s += v.kronecker(&v.conjugate());
        }
        s -= (self.damping.kronecker(&id) + id.kronecker(&self.damping.transpose())) * c(0.5, 0.0);
        s
    }

    /// `Σ V_k V_k† = Σ V_k† V_k`, i.e. the maximally mixed state is stationary.
    pub fn is_unital(&self, tol: f64) -> bool {
        let mut forward = DMatrix::<C64>::zeros(self.dim(), self.dim());
        for (v, vd) in self.jump_ops.iter().zip(&self.jump_adjoints) {
            forward += v.as_matrix() * vd;
        }
        crate::linalg::max_abs_diff(&forward, &self.damping) <= tol
    }
}

fn dephasing_jumps(obs: &Observable, rates: &[f64]) -> Result<Vec<ComplexMatrix>> {
    if rates.len() != obs.num_outcomes() {
        return Err(Error::DimensionMismatch {
            expected: obs.num_outcomes(),
            found: rates.len(),
        });
    }
    if rates.iter().any(|&g| !(g >= 0.0) || !g.is_finite()) {
        return Err(Error::InvalidArgument("dephasing rates must be finite and non-negative"));
    }
    Ok(obs
        .projections()
        .iter()
        .zip(rates)
        .filter(|(_, &g)| g > 0.0)
        .map(|(p, &g)| p.matrix().scale(c(libm::sqrt(g), 0.0)))
        .collect())
}

fn check_dim(spec: &LindbladSpec, n: usize) -> Result<()> {
    if spec.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: n,
        });
    }
    Ok(())
}

/// `dρ/dt` under the Lindblad generator.
pub fn lindblad_rhs(rho: &DensityMatrix, spec: &LindbladSpec) -> Result<HermitianOperator> {
    check_dim(spec, rho.dim())?;
    Ok(HermitianOperator::symmetrize(spec.apply(rho.as_matrix())))
}

/// Sampled solution of the Lindblad equation.
#[derive(Clone, Debug)]
pub struct Trajectory {
    points: Vec<(f64, DensityMatrix)>,
}

impl Trajectory {
    pub fn points(&self) -> &[(f64, DensityMatrix)] {
        &self.points
    }

    pub fn final_state(&self) -> &DensityMatrix {
        &self.points.last().expect("trajectory holds the initial state").1
    }

    pub fn final_time(&self) -> f64 {
        self.points.last().expect("trajectory holds the initial state").0
    }
}

/// Fixed-step RK4 from `t = 0` to `t_final`, storing every step.
///
/// A step whose trace drift exceeds [`TRACE_DRIFT_TOL`] is retried with half
/// the step size; twenty consecutive failures raise [`Error::Stiffness`].
/// Stored states are re-symmetrized and trace-normalized.
pub fn integrate_lindblad(
    rho0: &DensityMatrix,
    spec: &LindbladSpec,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    check_dim(spec, rho0.dim())?;
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidArgument("t_final must be positive"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument("dt must be positive"));
    }
    let n = rho0.dim();
    let mut f = |y: &[C64], out: &mut [C64]| {
        let x = DMatrix::from_column_slice(n, n, y);
        out.copy_from_slice(spec.apply(&x).as_slice());
    };
    let mut rk = Rk4::new(n * n);
    let mut y: Vec<C64> = rho0.as_matrix().as_slice().to_vec();
    let mut next = y.clone();
    let mut points = Vec::with_capacity(libm::ceil(t_final / dt) as usize + 1);
    points.push((0.0, rho0.clone()));

    let mut t = 0.0;
    let mut h = dt;
    let end_tol = 1e-12 * t_final;
    while t_final - t > end_tol {
        let mut halvings = 0;
        loop {
            let step = h.min(t_final - t);
            rk.step(&mut f, &y, step, &mut next);
            let trace: C64 = (0..n).map(|i| next[i * n + i]).sum();
            let drift = (trace - c(1.0, 0.0)).norm();
            if drift <= TRACE_DRIFT_TOL {
                t = if t_final - (t + step) <= end_tol { t_final } else { t + step };
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::Stiffness { t });
            }
            h *= 0.5;
        }
        let state = DensityMatrix::renormalized(DMatrix::from_column_slice(n, n, &next));
        y.copy_from_slice(state.as_matrix().as_slice());
        points.push((t, state));
    }
    Ok(Trajectory { points })
}

/// Outcome of the two algebraic decoherence conditions.
#[derive(Clone, Debug)]
pub struct DecoherenceReport {
    /// `{H, V_k, V_k†}'' = ⟨A⟩`: the invariant states are exactly `Φ_A(S_n)`.
    pub generated_algebra_matches: bool,
    /// `{H, V_k, V_k†}'' = {V_k, V_k†}''`: every initial state converges.
    pub all_initial_converge: bool,
    pub generated: AlgebraBasis,
    pub jump_algebra: AlgebraBasis,
    pub observable_algebra: AlgebraBasis,
}

impl DecoherenceReport {
    pub fn passes(&self) -> bool {
        self.generated_algebra_matches && self.all_initial_converge
    }
}

/// Compares `{H, V_k, V_k†}''`, `{V_k, V_k†}''` and `⟨A⟩`.
pub fn check_decoherence(spec: &LindbladSpec, obs: &Observable) -> Result<DecoherenceReport> {
    check_dim(spec, obs.dim())?;
    let n = spec.dim();
    let mut all = Vec::with_capacity(spec.jump_ops.len() + 1);
    all.push(spec.hamiltonian.matrix().clone());
    all.extend(spec.jump_ops.iter().cloned());
    let generated = double_commutant(&all)?;
    // the algebra generated by nothing is the scalars
    let jump_algebra = if spec.jump_ops.is_empty() {
        double_commutant(&[ComplexMatrix::identity(n)])?
    } else {
        double_commutant(&spec.jump_ops)?
    };
    let observable_algebra = double_commutant(&[obs.operator().matrix().clone()])?;
    Ok(DecoherenceReport {
        generated_algebra_matches: algebra_equal(&generated, &observable_algebra, ALGEBRA_TOL),
        all_initial_converge: algebra_equal(&generated, &jump_algebra, ALGEBRA_TOL),
        generated,
        jump_algebra,
        observable_algebra,
    })
}

/// Eigenvalues of `L̂` as a linear map on `M_n`.
#[derive(Clone, Debug)]
pub struct SuperoperatorSpectrum {
    /// Sorted by descending real part, then ascending imaginary part.
    pub eigenvalues: Vec<C64>,
    /// Eigenvalues with `|Re λ| <= tol` and `|Im λ| <= tol`.
    pub zero_subspace_dim: usize,
    /// Eigenvalues with `|Re λ| <= tol`.
    pub zero_real_dim: usize,
}

impl SuperoperatorSpectrum {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest `-Re λ` among eigenvalues with `Re λ < -tol`, if any decay.
    pub fn slowest_decay_rate(&self, tol: f64) -> Option<f64> {
        self.eigenvalues
            .iter()
            .filter(|z| z.re < -tol)
            .map(|z| -z.re)
            .reduce(f64::min)
    }

    /// Largest `|λ|`.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Spectrum of the `n² x n²` matrix of `L̂`.
pub fn superoperator_spectrum(spec: &LindbladSpec, tol: f64) -> Result<SuperoperatorSpectrum> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("spectrum tolerance must be positive"));
    }
    let s = spec.superoperator();
    let dim = s.nrows();
    let (_, t) = Schur::try_new(s, f64::EPSILON, 0)
        .ok_or(Error::Numerical("Schur decomposition did not converge"))?
        .unpack();
    let mut eigenvalues: Vec<C64> = Vec::with_capacity(dim);
    let mut k = 0;
    while k < dim {
        // complex Schur forms are triangular; a surviving 2x2 bump is solved directly
        if k + 1 < dim && t[(k + 1, k)].norm() > 1e-12 * (t[(k, k)].norm() + t[(k + 1, k + 1)].norm()).max(1.0) {
            let (a, b, cc, d) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
            let half_tr = (a + d) * 0.5;
            let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * cc).sqrt();
            eigenvalues.push(half_tr + disc);
            eigenvalues.push(half_tr - disc);
            k += 2;
        } else {
            eigenvalues.push(t[(k, k)]);
            k += 1;
        }
    }
    eigenvalues.sort_by(|x, y| y.re.total_cmp(&x.re).then(x.im.total_cmp(&y.im)));
    let zero_real_dim = eigenvalues.iter().filter(|z| z.re.abs() <= tol).count();
    let zero_subspace_dim = eigenvalues
        .iter()
        .filter(|z| z.re.abs() <= tol && z.im.abs() <= tol)
        .count();
    Ok(SuperoperatorSpectrum {
        eigenvalues,
        zero_subspace_dim,
        zero_real_dim,
    })
}

/// Time cap `50 / (slowest decay rate)`, i.e. many e-foldings of the slowest coherence.
pub fn default_time_cap(spectrum: &SuperoperatorSpectrum) -> f64 {
    50.0 / spectrum.slowest_decay_rate(SPECTRUM_TOL).unwrap_or(1.0)
}

/// Step `0.01 / (fastest rate)` used by [`asymptotic_state`].
pub fn default_step(spectrum: &SuperoperatorSpectrum) -> f64 {
    let radius = spectrum.spectral_radius();
    if radius > 0.0 {
        0.01 / radius
    } else {
        0.01
    }
}

/// Integrates until the stationarity residual `‖L̂(ρ)‖_F` drops below
/// `eps * (slowest decay rate)`, then checks the result against `Φ_A(ρ0)`.
pub fn asymptotic_state(
    rho0: &DensityMatrix,
    spec: &LindbladSpec,
    obs: &Observable,
    eps: f64,
    t_cap: f64,
) -> Result<DensityMatrix> {
    check_dim(spec, rho0.dim())?;
    if !(eps > 0.0) || !(t_cap > 0.0) {
        return Err(Error::InvalidArgument("eps and t_cap must be positive"));
    }
    let report = check_decoherence(spec, obs)?;
    if !report.generated_algebra_matches {
        return Err(Error::DecoherenceViolated("generated algebra differs from ⟨A⟩"));
    }
    if !report.all_initial_converge {
        return Err(Error::DecoherenceViolated("Hamiltonian is not in the jump algebra"));
    }
    let spectrum = superoperator_spectrum(spec, SPECTRUM_TOL)?;
    let decay = spectrum.slowest_decay_rate(SPECTRUM_TOL).unwrap_or(1.0);
    let dt = default_step(&spectrum);
    let threshold = eps * decay;

    let n = rho0.dim();
    let mut f = |y: &[C64], out: &mut [C64]| {
        let x = DMatrix::from_column_slice(n, n, y);
        out.copy_from_slice(spec.apply(&x).as_slice());
    };
    let mut rk = Rk4::new(n * n);
    let mut rho = rho0.as_matrix().clone();
    let mut next: Vec<C64> = rho.as_slice().to_vec();
    let mut t = 0.0;
    while frobenius(&spec.apply(&rho)) >= threshold {
        if t >= t_cap {
            return Err(Error::NonConvergence { t_cap });
        }
        rk.step(&mut f, rho.as_slice(), dt, &mut next);
        rho = DensityMatrix::renormalized(DMatrix::from_column_slice(n, n, &next))
            .as_matrix()
            .clone();
        t += dt;
    }
    let state = DensityMatrix::renormalized(rho);
    let target = conditional_expectation(rho0, obs)?;
    let distance = state.frobenius_distance(&target);
    if distance > 10.0 * eps {
        return Err(Error::AsymptoticMismatch { distance });
    }
    Ok(state)
}
