//! Monte Carlo over the external state: repeated purification runs from a
//! fixed `μ0` with `μ_ext` drawn uniformly, tallied against `r(0)`.
//!
//! Every trial owns the stream `(seed, trial)`, so a trial can be run in
//! isolation ([`run_trial`]) and the tallies ([`OutcomeStats::from_records`])
//! do not depend on the order in which records arrive.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::purification::{
    classify_raw, evolve_purification, integrate_purification, PurificationOptions,
    Subsimplex,
};
use crate::rng::{sample_simplex_uniform, RngStream};
use crate::simplex::SimplexPoint;

/// How a trial decides its outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Integrate the flow to a vertex.
    FullOde,
    /// Read the vertex off the subsimplex containing `μ_ext`.
    ClassifyOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarnessOptions {
    pub a: f64,
    pub mode: Mode,
    pub purification: PurificationOptions,
}

impl HarnessOptions {
    pub fn new(a: f64, mode: Mode) -> Self {
        Self {
            a,
            mode,
            purification: PurificationOptions::for_rate(a),
        }
    }
}

/// One trial of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    /// Vertex reached, `None` if unresolved.
    pub outcome: Option<usize>,
    /// Geometric prediction for the same `μ_ext`.
    pub predicted: Subsimplex,
    /// Time to convergence (full ODE only).
    pub t_converged: Option<f64>,
    pub steps: usize,
}

impl TrialRecord {
    /// A resolved trial whose vertex is not among the predicted indices.
    pub fn disagrees(&self) -> bool {
        match (self.outcome, &self.predicted) {
            (None, _) => false,
            (Some(i), Subsimplex::Interior(j)) => i != *j,
            (Some(i), Subsimplex::Boundary(tied)) => !tied.contains(&i),
        }
    }
}

/// `r(0)`, the probability of ending at each vertex.
pub fn born_probabilities(mu0: &SimplexPoint) -> Vec<f64> {
    mu0.coords().to_vec()
}

/// Relative volume of the attractor region `{μ_ext ∈ S_i(μ0)}`.
///
/// The subsimplex `S_i(μ0)` shares the face opposite `P_i` with `S_A`; its
/// height over that face is `r_i(0)` against `1` for `S_A`.
pub fn attractor_volume_oracle(mu0: &SimplexPoint, i: usize) -> Result<f64> {
    mu0.coords().get(i).copied().ok_or(Error::IndexOutOfRange {
        index: i,
        len: mu0.m(),
    })
}

fn resolve(
    mu0: &SimplexPoint,
    mu_ext: &SimplexPoint,
    trial: u64,
    options: &HarnessOptions,
) -> Result<TrialRecord> {
    let predicted = classify_raw(mu0.coords(), mu_ext.coords());
    match options.mode {
        Mode::ClassifyOnly => {
            let outcome = match &predicted {
                Subsimplex::Interior(i) => Some(*i),
                Subsimplex::Boundary(_) => None,
            };
            Ok(TrialRecord {
                trial,
                outcome,
                predicted,
                t_converged: None,
                steps: 0,
            })
        }
        Mode::FullOde => {
            let run = integrate_purification(mu0, mu_ext, options.a, &options.purification)?;
            let outcome = run.status.index();
            Ok(TrialRecord {
                trial,
                outcome,
                predicted,
                t_converged: outcome.map(|_| run.t_elapsed),
                steps: run.steps,
            })
        }
    }
}

/// Trial `trial`: `μ_ext` is the first uniform draw of stream `(seed, trial)`.
pub fn run_trial(
    mu0: &SimplexPoint,
    trial: u64,
    seed: u64,
    options: &HarnessOptions,
) -> Result<TrialRecord> {
    let mut rng = RngStream::new(seed, trial);
    let mu_ext = sample_simplex_uniform(mu0.m(), &mut rng)?;
    resolve(mu0, &mu_ext, trial, options)
}

/// Aggregated outcomes of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeStats {
    pub trials: usize,
    pub counts: Vec<usize>,
    pub unresolved: usize,
    pub frequencies: Vec<f64>,
    pub born: Vec<f64>,
    pub stderr: Vec<f64>,
    pub max_abs_dev: f64,
    pub chi_square: f64,
    /// Resolved trials whose vertex differs from the geometric prediction.
    pub oracle_mismatches: usize,
}

impl OutcomeStats {
    pub fn from_records(born: Vec<f64>, records: &[TrialRecord]) -> Result<Self> {
        let m = born.len();
        let trials = records.len();
        if trials == 0 {
            return Err(Error::InvalidArgument("no trials"));
        }
        let mut counts = vec![0usize; m];
        let mut unresolved = 0;
        let mut oracle_mismatches = 0;
        for r in records {
            match r.outcome {
                Some(i) if i < m => counts[i] += 1,
                Some(i) => return Err(Error::IndexOutOfRange { index: i, len: m }),
                None => unresolved += 1,
            }
            if r.disagrees() {
                oracle_mismatches += 1;
            }
        }
        let n = trials as f64;
        let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let stderr = born
            .iter()
            .map(|&p| libm::sqrt(p * (1.0 - p) / n))
            .collect();
        let max_abs_dev = frequencies
            .iter()
            .zip(&born)
            .map(|(f, p)| (f - p).abs())
            .fold(0.0, f64::max);
        let chi_square = counts
            .iter()
            .zip(&born)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&c, &p)| {
                let expected = n * p;
                (c as f64 - expected) * (c as f64 - expected) / expected
            })
            .sum();
        Ok(Self {
            trials,
            counts,
            unresolved,
            frequencies,
            born,
            stderr,
            max_abs_dev,
            chi_square,
            oracle_mismatches,
        })
    }

    /// Every `|frequency_i - born_i| ≤ k · stderr_i`.
    pub fn within_sigma(&self, k: f64) -> bool {
        self.frequencies
            .iter()
            .zip(&self.born)
            .zip(&self.stderr)
            .all(|((f, p), s)| (f - p).abs() <= k * s)
    }

    pub fn unresolved_rate(&self) -> f64 {
        self.unresolved as f64 / self.trials as f64
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1"));
    }
    Ok(())
}

/// Runs `trials` trials sequentially.
pub fn run_experiment(
    mu0: &SimplexPoint,
    trials: usize,
    seed: u64,
    options: &HarnessOptions,
) -> Result<OutcomeStats> {
    check_trials(trials)?;
    let records = (0..trials as u64)
        .map(|t| run_trial(mu0, t, seed, options))
        .collect::<Result<Vec<_>>>()?;
    OutcomeStats::from_records(born_probabilities(mu0), &records)
}

/// One interrupted trial: the state at the interruption and the restarted run.
#[derive(Clone, Debug, PartialEq)]
pub struct InterruptedRecord {
    pub intermediate: SimplexPoint,
    pub restart: TrialRecord,
}

/// Trial `trial` of the interrupted protocol.
///
/// Stream `(seed, trial)` yields the restart state `μ_ext(2)` first and the
/// pre-interruption state `μ_ext(1)` second, so `t_interrupt = 0` replays
/// [`run_trial`] exactly.
pub fn run_interrupted_trial(
    mu0: &SimplexPoint,
    t_interrupt: f64,
    trial: u64,
    seed: u64,
    options: &HarnessOptions,
) -> Result<InterruptedRecord> {
    if !(t_interrupt >= 0.0) || !t_interrupt.is_finite() {
        return Err(Error::InvalidArgument("t_interrupt must be non-negative"));
    }
    let mut rng = RngStream::new(seed, trial);
    let restart_ext = sample_simplex_uniform(mu0.m(), &mut rng)?;
    let first_ext = sample_simplex_uniform(mu0.m(), &mut rng)?;
    let intermediate = if t_interrupt == 0.0 {
        mu0.clone()
    } else {
        evolve_purification(
            mu0,
            &first_ext,
            options.a,
            t_interrupt,
            &options.purification.step,
        )?
    };
    let restart = resolve(&intermediate, &restart_ext, trial, options)?;
    Ok(InterruptedRecord {
        intermediate,
        restart,
    })
}

/// Aggregate of an interrupted experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct InterruptedStats {
    /// Final outcomes against `r(0)`.
    pub stats: OutcomeStats,
    /// Trial mean of `r(t_interrupt)`.
    pub intermediate_mean: Vec<f64>,
    /// Standard error of that mean.
    pub intermediate_stderr: Vec<f64>,
}

impl InterruptedStats {
    pub fn from_records(mu0: &SimplexPoint, records: &[InterruptedRecord]) -> Result<Self> {
        let restarts: Vec<TrialRecord> = records.iter().map(|r| r.restart.clone()).collect();
        let stats = OutcomeStats::from_records(born_probabilities(mu0), &restarts)?;
        let m = mu0.m();
        let n = records.len() as f64;
        let mut mean = vec![0.0; m];
        for r in records {
            for (acc, &x) in mean.iter_mut().zip(r.intermediate.coords()) {
                *acc += x;
            }
        }
        for x in mean.iter_mut() {
            *x /= n;
        }
        let mut var = vec![0.0; m];
        for r in records {
            for ((acc, &x), mu) in var.iter_mut().zip(r.intermediate.coords()).zip(&mean) {
                *acc += (x - mu) * (x - mu);
            }
        }
        let denom = (n - 1.0).max(1.0);
        let intermediate_stderr = var.iter().map(|v| libm::sqrt(v / denom / n)).collect();
        Ok(Self {
            stats,
            intermediate_mean: mean,
            intermediate_stderr,
        })
    }

    /// Every `|mean_i - r_i(0)| ≤ k · stderr_i`.
    pub fn mean_within_sigma(&self, k: f64) -> bool {
        self.intermediate_mean
            .iter()
            .zip(&self.stats.born)
            .zip(&self.intermediate_stderr)
            .all(|((m, p), s)| (m - p).abs() <= k * s)
    }
}

/// Runs the interrupted protocol sequentially.
pub fn interrupted_experiment(
    mu0: &SimplexPoint,
    t_interrupt: f64,
    trials: usize,
    seed: u64,
    options: &HarnessOptions,
) -> Result<InterruptedStats> {
    check_trials(trials)?;
    let records = (0..trials as u64)
        .map(|t| run_interrupted_trial(mu0, t_interrupt, t, seed, options))
        .collect::<Result<Vec<_>>>()?;
    InterruptedStats::from_records(mu0, &records)
}
