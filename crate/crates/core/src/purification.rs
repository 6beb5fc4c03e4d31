//! Nonlinear purification flow on the simplex of decohered states.
//!
//! For `μ = Σ r_k P_k` and a fixed external state `μ_ext = Σ s_k P_k`:
//!
//! ```text
//! dμ/dt = f - μ Tr f,    f_k = a r_k (λ r_k - s_k),
//! λ = max{κ ∈ [0, 1] : μ_ext - κ μ >= 0} = min(1, min_{r_k > 0} s_k / r_k).
//! ```
//!
//! The index `i` attaining the minimum ratio names the subsimplex
//! `S_i(μ) = conv(μ, P_k : k ≠ i)` containing `μ_ext`. The index is conserved
//! along the flow and the trajectory ends at the vertex `P_i`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ode::{AdaptiveRk4, StepControl};
use crate::simplex::{nearest_vertex, SimplexPoint, NEGATIVE_TOL};

/// Ratios closer than this to the minimum count as tied.
pub const TIE_TOL: f64 = 1e-12;
/// Sup-norm distance to a vertex that counts as converged.
pub const DEFAULT_CONV_TOL: f64 = 1e-6;
/// Default time cap in units of `1/a`.
pub const DEFAULT_T_CAP_RATE_UNITS: f64 = 1e6;

/// Which subsimplex `S_i(μ)` holds `μ_ext`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Subsimplex {
    Interior(usize),
    /// `μ_ext` lies on the common boundary of the listed subsimplices.
    Boundary(Vec<usize>),
}

fn check_pair(mu: &SimplexPoint, mu_ext: &SimplexPoint) -> Result<()> {
    if mu.m() != mu_ext.m() {
        return Err(Error::DimensionMismatch {
            expected: mu.m(),
            found: mu_ext.m(),
        });
    }
    Ok(())
}

fn check_rate(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidArgument("rate a must be positive"));
    }
    Ok(())
}

pub(crate) fn lambda_raw(r: &[f64], s: &[f64]) -> f64 {
    r.iter()
        .zip(s)
        .filter(|(&rk, _)| rk > 0.0)
        .map(|(&rk, &sk)| sk / rk)
        .fold(1.0, f64::min)
}

pub(crate) fn classify_raw(r: &[f64], s: &[f64]) -> Subsimplex {
    let ratio = |k: usize| {
        if r[k] > 0.0 {
            s[k] / r[k]
        } else {
            f64::INFINITY
        }
    };
    let min = (0..r.len()).map(ratio).fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = (0..r.len()).filter(|&k| ratio(k) - min <= TIE_TOL).collect();
    if tied.len() == 1 {
        Subsimplex::Interior(tied[0])
    } else {
        Subsimplex::Boundary(tied)
    }
}

pub(crate) fn rhs_raw(r: &[f64], s: &[f64], a: f64, out: &mut [f64]) {
    let lambda = lambda_raw(r, s);
    let mut total = 0.0;
    for k in 0..r.len() {
        let f = a * r[k] * (lambda * r[k] - s[k]);
        out[k] = f;
        total += f;
    }
    for k in 0..r.len() {
        out[k] -= r[k] * total;
    }
}

/// Largest `κ ∈ [0, 1]` with `μ_ext - κ μ` positive.
pub fn lambda_max(mu: &SimplexPoint, mu_ext: &SimplexPoint) -> Result<f64> {
    check_pair(mu, mu_ext)?;
    Ok(lambda_raw(mu.coords(), mu_ext.coords()))
}

/// `argmin_k s_k / r_k`, or the tied set when the minimum is not unique.
pub fn classify_subsimplex(mu: &SimplexPoint, mu_ext: &SimplexPoint) -> Result<Subsimplex> {
    check_pair(mu, mu_ext)?;
    Ok(classify_raw(mu.coords(), mu_ext.coords()))
}

/// Tangent vector `F = f - μ Tr f`.
pub fn purification_rhs(mu: &SimplexPoint, mu_ext: &SimplexPoint, a: f64) -> Result<Vec<f64>> {
    check_pair(mu, mu_ext)?;
    check_rate(a)?;
    let mut out = vec![0.0; mu.m()];
    rhs_raw(mu.coords(), mu_ext.coords(), a, &mut out);
    Ok(out)
}

/// The tangent vector written as a nonnegative combination of the cone
/// generators `μ - P_k`, `k ≠ i`:
///
/// ```text
/// F = a Σ_{k≠i} r_k (s_k - (s_i / r_i) r_k) (μ - P_k)
/// ```
///
/// Independent of [`purification_rhs`]; used to cross-check it.
pub fn cone_form_rhs(mu: &SimplexPoint, mu_ext: &SimplexPoint, a: f64) -> Result<Vec<f64>> {
    check_pair(mu, mu_ext)?;
    check_rate(a)?;
    let i = match classify_subsimplex(mu, mu_ext)? {
        Subsimplex::Interior(i) => i,
        Subsimplex::Boundary(tied) => return Err(Error::AmbiguousDomain(tied)),
    };
    let r = mu.coords();
    let s = mu_ext.coords();
    let ratio = s[i] / r[i];
    let mut out = vec![0.0; r.len()];
    for k in (0..r.len()).filter(|&k| k != i) {
        let weight = a * r[k] * (s[k] - ratio * r[k]);
        for (j, o) in out.iter_mut().enumerate() {
            let generator = if j == k { r[j] - 1.0 } else { r[j] };
            *o += weight * generator;
        }
    }
    Ok(out)
}

/// `K_i = a (4 + 6 / s_i)`, the Lipschitz constant of the tangent field on
/// the domain `D_i(μ_ext)` in the sup norm.
pub fn lipschitz_constant(mu_ext: &SimplexPoint, i: usize, a: f64) -> Result<f64> {
    check_rate(a)?;
    let s_i = *mu_ext.coords().get(i).ok_or(Error::IndexOutOfRange {
        index: i,
        len: mu_ext.m(),
    })?;
    if !(s_i > 0.0) {
        return Err(Error::UnboundedDomain { index: i });
    }
    Ok(a * (4.0 + 6.0 / s_i))
}

/// Integration settings for the purification flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PurificationOptions {
    pub conv_tol: f64,
    pub t_cap: f64,
    pub step: StepControl,
}

impl PurificationOptions {
    /// Defaults scaled to the rate `a`: convergence tolerance `1e-6`,
    /// time cap `1e6 / a`.
    pub fn for_rate(a: f64) -> Self {
        Self {
            conv_tol: DEFAULT_CONV_TOL,
            t_cap: DEFAULT_T_CAP_RATE_UNITS / a,
            step: default_step_control(a),
        }
    }
}

pub(crate) fn default_step_control(a: f64) -> StepControl {
    StepControl {
        abs_tol: 1e-11,
        rel_tol: 1e-8,
        initial_step: 0.01 / a,
        max_step: 50.0 / a,
    }
}

/// Final status of a purification run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutcomeStatus {
    Converged(usize),
    Unresolved,
}

impl OutcomeStatus {
    pub fn index(self) -> Option<usize> {
        match self {
            OutcomeStatus::Converged(i) => Some(i),
            OutcomeStatus::Unresolved => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PurificationOutcome {
    pub status: OutcomeStatus,
    pub final_point: SimplexPoint,
    pub t_elapsed: f64,
    pub steps: usize,
}

fn admissible(y: &[f64]) -> bool {
    y.iter().all(|&r| r >= -NEGATIVE_TOL)
}

fn project_in_place(y: &mut [f64]) {
    let mut sum = 0.0;
    for r in y.iter_mut() {
        if *r < 0.0 {
            *r = 0.0;
        }
        sum += *r;
    }
    for r in y.iter_mut() {
        *r /= sum;
    }
}

/// Integrates until the state is within `conv_tol` of a vertex or `t_cap`
/// is reached.
pub fn integrate_purification(
    mu0: &SimplexPoint,
    mu_ext: &SimplexPoint,
    a: f64,
    options: &PurificationOptions,
) -> Result<PurificationOutcome> {
    integrate_purification_observed(mu0, mu_ext, a, options, |_, _| {})
}

/// As [`integrate_purification`], calling `observer(t, r)` at `t = 0` and
/// after every accepted step.
pub fn integrate_purification_observed<O>(
    mu0: &SimplexPoint,
    mu_ext: &SimplexPoint,
    a: f64,
    options: &PurificationOptions,
    mut observer: O,
) -> Result<PurificationOutcome>
where
    O: FnMut(f64, &[f64]),
{
    check_pair(mu0, mu_ext)?;
    check_rate(a)?;
    if !(options.conv_tol > 0.0) || !(options.t_cap > 0.0) {
        return Err(Error::InvalidArgument("conv_tol and t_cap must be positive"));
    }
    let s = mu_ext.coords();
    let m = mu0.m();
    let mut y = mu0.coords().to_vec();
    let mut t = 0.0;
    let mut rhs = |r: &[f64], out: &mut [f64]| rhs_raw(r, s, a, out);
    let mut rk = AdaptiveRk4::new(m, options.step);
    let mut slope = vec![0.0; m];
    observer(t, &y);

    let status = loop {
        let (i, dist) = nearest_vertex(&y);
        if dist <= options.conv_tol {
            break OutcomeStatus::Converged(i);
        }
        if t >= options.t_cap {
            break OutcomeStatus::Unresolved;
        }
        rhs(&y, &mut slope);
        if slope.iter().all(|&v| v == 0.0) {
            // exact fixed point off the vertices: the solution is constant
            t = options.t_cap;
            observer(t, &y);
            break OutcomeStatus::Unresolved;
        }
        let remaining = options.t_cap - t;
        rk.advance(&mut rhs, &mut |c: &[f64]| admissible(c), &mut t, &mut y, remaining)?;
        project_in_place(&mut y);
        observer(t, &y);
    };

    Ok(PurificationOutcome {
        status,
        final_point: SimplexPoint::projected(y),
        t_elapsed: t,
        steps: rk.accepted,
    })
}

/// State of the flow at time `t_end`, without a convergence stop.
pub fn evolve_purification(
    mu0: &SimplexPoint,
    mu_ext: &SimplexPoint,
    a: f64,
    t_end: f64,
    step: &StepControl,
) -> Result<SimplexPoint> {
    check_pair(mu0, mu_ext)?;
    check_rate(a)?;
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument("t_end must be non-negative"));
    }
    let s = mu_ext.coords();
    let mut y = mu0.coords().to_vec();
    let mut t = 0.0;
    let mut rhs = |r: &[f64], out: &mut [f64]| rhs_raw(r, s, a, out);
    let mut rk = AdaptiveRk4::new(y.len(), *step);
    let end_tol = 1e-12 * t_end.max(1.0);
    while t_end - t > end_tol {
        let remaining = t_end - t;
        rk.advance(&mut rhs, &mut |c: &[f64]| admissible(c), &mut t, &mut y, remaining)?;
        project_in_place(&mut y);
    }
    Ok(SimplexPoint::projected(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::strategy::Strategy;

    fn p(v: &[f64]) -> SimplexPoint {
        SimplexPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn lambda_examples() {
        assert!((lambda_max(&p(&[0.5, 0.5]), &p(&[0.3, 0.7])).unwrap() - 0.6).abs() < 1e-15);
        let mu = p(&[0.2, 0.3, 0.5]);
        assert_eq!(lambda_max(&mu, &mu).unwrap(), 1.0);
        assert_eq!(lambda_max(&p(&[1.0, 0.0, 0.0]), &p(&[0.2, 0.3, 0.5])).unwrap(), 0.2);
        assert!(lambda_max(&p(&[1.0, 0.0]), &mu).is_err());
    }

    #[test]
    fn lambda_is_the_largest_positive_scaling() {
        let mu = p(&[0.1, 0.6, 0.3]);
        let ext = p(&[0.25, 0.25, 0.5]);
        let l = lambda_max(&mu, &ext).unwrap();
        let ok = |k: f64| mu.coords().iter().zip(ext.coords()).all(|(r, s)| s - k * r >= -1e-12);
        assert!(ok(l));
        assert!(!ok(l + 1e-9));
    }

    #[test]
    fn classification_examples() {
        let third = 1.0 / 3.0;
        assert_eq!(
            classify_subsimplex(&p(&[third, third, third]), &p(&[0.2, 0.3, 0.5])).unwrap(),
            Subsimplex::Interior(0)
        );
        let mu = p(&[0.2, 0.3, 0.5]);
        assert_eq!(
            classify_subsimplex(&mu, &mu).unwrap(),
            Subsimplex::Boundary(vec![0, 1, 2])
        );
        assert_eq!(
            classify_subsimplex(&p(&[0.25, 0.75]), &p(&[0.5, 0.5])).unwrap(),
            Subsimplex::Interior(1)
        );
    }

    #[test]
    fn rhs_hand_value() {
        let f = purification_rhs(&p(&[0.5, 0.5]), &p(&[0.3, 0.7]), 1.0).unwrap();
        assert!((f[0] - 0.1).abs() < 1e-12 && (f[1] + 0.1).abs() < 1e-12);
        let g = cone_form_rhs(&p(&[0.5, 0.5]), &p(&[0.3, 0.7]), 1.0).unwrap();
        assert!((g[0] - 0.1).abs() < 1e-12 && (g[1] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn fixed_points_have_zero_tangent() {
        let ext = p(&[0.2, 0.3, 0.5]);
        assert!(purification_rhs(&ext, &ext, 1.0).unwrap().iter().all(|&v| v == 0.0));
        for i in 0..3 {
            let e = SimplexPoint::vertex(3, i);
            assert!(purification_rhs(&e, &ext, 2.0).unwrap().iter().all(|&v| v == 0.0));
            assert!(cone_form_rhs(&e, &ext, 2.0).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn cone_form_rejects_ties() {
        let ext = p(&[0.2, 0.3, 0.5]);
        assert!(matches!(
            cone_form_rhs(&ext, &ext, 1.0),
            Err(Error::AmbiguousDomain(_))
        ));
    }

    #[test]
    fn zero_faces_are_invariant() {
        let f = purification_rhs(&p(&[0.0, 0.4, 0.6]), &p(&[0.3, 0.3, 0.4]), 1.0).unwrap();
        assert_eq!(f[0], 0.0);
    }

    #[test]
    fn lipschitz_formula() {
        let ext = p(&[1.0, 0.0]);
        assert_eq!(lipschitz_constant(&ext, 0, 1.0).unwrap(), 10.0);
        assert!(matches!(
            lipschitz_constant(&ext, 1, 1.0),
            Err(Error::UnboundedDomain { index: 1 })
        ));
        assert_eq!(lipschitz_constant(&p(&[0.5, 0.5]), 0, 1.0).unwrap(), 16.0);
        assert!(lipschitz_constant(&ext, 3, 1.0).is_err());
    }

    #[test]
    fn vertex_start_converges_immediately() {
        let ext = p(&[0.2, 0.3, 0.5]);
        let out = integrate_purification(&SimplexPoint::vertex(3, 1), &ext, 1.0, &PurificationOptions::for_rate(1.0)).unwrap();
        assert_eq!(out.status, OutcomeStatus::Converged(1));
        assert_eq!(out.t_elapsed, 0.0);
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn coincident_start_is_unresolved() {
        let ext = p(&[0.2, 0.3, 0.5]);
        let opts = PurificationOptions::for_rate(1.0);
        let out = integrate_purification(&ext, &ext, 1.0, &opts).unwrap();
        assert_eq!(out.status, OutcomeStatus::Unresolved);
        assert_eq!(out.final_point, ext);
        assert_eq!(out.t_elapsed, opts.t_cap);
    }

    #[test]
    fn flows_to_classified_vertex() {
        let out = integrate_purification(&p(&[0.25, 0.75]), &p(&[0.5, 0.5]), 1.0, &PurificationOptions::for_rate(1.0)).unwrap();
        assert_eq!(out.status, OutcomeStatus::Converged(1));
    }

    #[test]
    fn short_time_cap_is_unresolved() {
        let mut opts = PurificationOptions::for_rate(1.0);
        opts.t_cap = 0.5;
        let out = integrate_purification(&p(&[0.25, 0.75]), &p(&[0.5, 0.5]), 1.0, &opts).unwrap();
        assert_eq!(out.status, OutcomeStatus::Unresolved);
        assert!((out.t_elapsed - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_level_flow_matches_fine_fixed_step_reference() {
        // reference: fixed-step RK4 with a tiny step
        let mu0 = [0.3, 0.7];
        let ext = [0.6, 0.4];
        let mut y = mu0;
        let h = 1e-4;
        let mut k = [[0.0; 2]; 4];
        for _ in 0..30_000 {
            rhs_raw(&y, &ext, 1.0, &mut k[0]);
            let y2 = [y[0] + 0.5 * h * k[0][0], y[1] + 0.5 * h * k[0][1]];
            rhs_raw(&y2, &ext, 1.0, &mut k[1]);
            let y3 = [y[0] + 0.5 * h * k[1][0], y[1] + 0.5 * h * k[1][1]];
            rhs_raw(&y3, &ext, 1.0, &mut k[2]);
            let y4 = [y[0] + h * k[2][0], y[1] + h * k[2][1]];
            rhs_raw(&y4, &ext, 1.0, &mut k[3]);
            for j in 0..2 {
                y[j] += h / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
            }
        }
        let out = evolve_purification(&p(&mu0), &p(&ext), 1.0, 3.0, &default_step_control(1.0)).unwrap();
        assert!((out.get(0) - y[0]).abs() < 1e-7, "{} vs {}", out.get(0), y[0]);
    }

    fn simplex(m: usize) -> impl proptest::strategy::Strategy<Value = Vec<f64>> {
        use proptest::prelude::*;
        prop::collection::vec(0.0f64..1.0, m).prop_filter_map("nonzero", |w| {
            let t: f64 = w.iter().sum();
            (t > 1e-6).then(|| w.into_iter().map(|x| x / t).collect())
        })
    }

    proptest::proptest! {
        #[test]
        fn tangent_is_sum_free_and_keeps_faces(
            (r, s) in (2usize..7).prop_flat_map(|m| (simplex(m), simplex(m))),
            a in 0.01f64..10.0,
        ) {
            let mut r = r;
            r[0] = 0.0;
            let total: f64 = r.iter().sum();
            if total == 0.0 {
                return Ok(());
            }
            r.iter_mut().for_each(|x| *x /= total);
            let f = purification_rhs(&p(&r), &p(&s), a).unwrap();
            proptest::prop_assert!(f.iter().sum::<f64>().abs() < 1e-12);
            proptest::prop_assert_eq!(f[0], 0.0);
        }

        #[test]
        fn lambda_keeps_the_difference_nonnegative(
            (r, s) in (2usize..7).prop_flat_map(|m| (simplex(m), simplex(m))),
        ) {
            let lambda = lambda_max(&p(&r), &p(&s)).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&lambda));
            for (rk, sk) in r.iter().zip(&s) {
                proptest::prop_assert!(sk - lambda * rk >= -1e-15);
            }
        }
    }
}
