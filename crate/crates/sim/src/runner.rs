//! Parallel trial execution.
//!
//! Trials are independent and each owns its random stream, so the parallel
//! runners return exactly what the sequential ones in `collapse_core` return.

use collapse_core::combined::{run_combined_trial, CombinedOptions, CombinedSpec, CombinedTrial};
use collapse_core::harness::{
    born_probabilities, run_interrupted_trial, run_trial, HarnessOptions, InterruptedRecord,
    InterruptedStats, OutcomeStats, TrialRecord,
};
use collapse_core::linalg::DensityMatrix;
use collapse_core::simplex::SimplexPoint;
use rayon::prelude::*;
use rayon::ThreadPoolBuilder;

/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "COLLAPSE_SIM_THREADS";

/// `0` lets rayon pick one worker per core.
pub fn run_trials<T, F>(trials: usize, threads: usize, f: F) -> collapse_core::Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> collapse_core::Result<T> + Sync,
{
    let pool = ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool with a fixed worker count");
    pool.install(|| (0..trials as u64).into_par_iter().map(&f).collect())
}

pub fn born_records(
    mu0: &SimplexPoint,
    trials: usize,
    seed: u64,
    options: &HarnessOptions,
    threads: usize,
) -> collapse_core::Result<Vec<TrialRecord>> {
    run_trials(trials, threads, |t| run_trial(mu0, t, seed, options))
}

pub fn born_experiment(
    mu0: &SimplexPoint,
    trials: usize,
    seed: u64,
    options: &HarnessOptions,
    threads: usize,
) -> collapse_core::Result<(OutcomeStats, Vec<TrialRecord>)> {
    let records = born_records(mu0, trials, seed, options, threads)?;
    let stats = OutcomeStats::from_records(born_probabilities(mu0), &records)?;
    Ok((stats, records))
}

pub fn interrupted_experiment(
    mu0: &SimplexPoint,
    t_interrupt: f64,
    trials: usize,
    seed: u64,
    options: &HarnessOptions,
    threads: usize,
) -> collapse_core::Result<(InterruptedStats, Vec<InterruptedRecord>)> {
    let records = run_trials(trials, threads, |t| {
        run_interrupted_trial(mu0, t_interrupt, t, seed, options)
    })?;
    let stats = InterruptedStats::from_records(mu0, &records)?;
    Ok((stats, records))
}

pub fn combined_trials(
    rho0: &DensityMatrix,
    spec: &CombinedSpec,
    trials: usize,
    seed: u64,
    options: &CombinedOptions,
    threads: usize,
) -> collapse_core::Result<Vec<CombinedTrial>> {
    run_trials(trials, threads, |t| run_combined_trial(rho0, spec, t, seed, options))
}
