//! Small-rate behaviour of the single-equation dynamics.

use collapse_core::combined::{evolve_combined, integrate_combined, CombinedOptions, CombinedSpec};
use collapse_core::lindblad::LindbladSpec;
use collapse_core::linalg::{restrict_to_algebra, DensityMatrix, Observable};
use collapse_core::purification::{integrate_purification, PurificationOptions};
use collapse_core::rng::{sample_simplex_uniform, RngStream};
use collapse_core::simplex::SimplexPoint;
use collapse_core::StepControl;
use num_complex::Complex64;

fn qubit() -> Observable {
    Observable::from_diagonal(&[0.0, 1.0])
}

fn tight() -> StepControl {
    StepControl {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        initial_step: 1e-3,
        max_step: 0.05,
    }
}

#[test]
fn small_rate_departs_linearly_from_pure_decoherence() {
    let obs = qubit();
    let lindblad = LindbladSpec::dephasing(&obs, &[1.0, 1.0]).unwrap();
    let ext = SimplexPoint::new(vec![0.35, 0.65]).unwrap();
    let rho0 = DensityMatrix::pure(&[Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]).unwrap();
    let times: Vec<f64> = (1..=20).map(|k| 0.5 * k as f64).collect();
    let reference = evolve_combined(
        &rho0,
        &CombinedSpec::new(lindblad.clone(), obs.clone(), ext.clone(), 0.0).unwrap(),
        &times,
        &tight(),
    )
    .unwrap();

    let mut constants = Vec::new();
    for a in [0.01, 0.001] {
        let spec = CombinedSpec::new(lindblad.clone(), obs.clone(), ext.clone(), a).unwrap();
        let states = evolve_combined(&rho0, &spec, &times, &tight()).unwrap();
        let c = states
            .iter()
            .zip(&reference)
            .zip(&times)
            .map(|((x, y), t)| x.frobenius_distance(y) / (a * t))
            .fold(0.0, f64::max);
        constants.push(c);
    }
    println!("empirical C: {constants:?}");
    assert!(constants.iter().all(|&c| c > 0.0 && c < 1.0), "{constants:?}");
    let spread = constants[0] / constants[1];
    assert!((0.5..2.0).contains(&spread), "{constants:?}");
}

#[test]
fn diagonal_start_matches_two_step_outcome() {
    let obs = Observable::from_diagonal(&[0.0, 1.0, 2.0]);
    let lindblad = LindbladSpec::dephasing(&obs, &[1.0, 1.0, 1.0]).unwrap();
    let a = 0.01;
    let mut rng = RngStream::new(17, 0);
    for _ in 0..40 {
        let r = sample_simplex_uniform(3, &mut rng).unwrap();
        let ext = sample_simplex_uniform(3, &mut rng).unwrap();
        let rho0 = DensityMatrix::from_diagonal(r.coords()).unwrap();
        let spec = CombinedSpec::new(lindblad.clone(), obs.clone(), ext.clone(), a).unwrap();
        let combined = integrate_combined(&rho0, &spec, &CombinedOptions::for_spec(&spec)).unwrap();
        let restricted = restrict_to_algebra(&rho0, &obs).unwrap();
        let flow = integrate_purification(&restricted, &ext, a, &PurificationOptions::for_rate(a)).unwrap();
        assert_eq!(combined.status.index(), flow.status.index(), "r {:?}, ext {:?}", r.coords(), ext.coords());
        assert!(flow.status.index().is_some());
    }
}

#[test]
fn pure_pointer_state_is_converged_at_once() {
    let obs = Observable::from_diagonal(&[0.0, 1.0, 2.0]);
    let lindblad = LindbladSpec::dephasing(&obs, &[1.0, 1.0, 1.0]).unwrap();
    let ext = SimplexPoint::new(vec![0.2, 0.3, 0.5]).unwrap();
    let spec = CombinedSpec::new(lindblad, obs, ext, 0.1).unwrap();
    let rho0 = DensityMatrix::from_diagonal(&[0.0, 1.0, 0.0]).unwrap();
    let run = integrate_combined(&rho0, &spec, &CombinedOptions::for_spec(&spec)).unwrap();
    assert_eq!(run.status.index(), Some(1));
    assert_eq!(run.steps, 0);
}
