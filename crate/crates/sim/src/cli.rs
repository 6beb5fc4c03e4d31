use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use collapse_core::combined::{combined_stats, CombinedTrial};
use collapse_core::harness::{InterruptedRecord, OutcomeStats, TrialRecord};
use collapse_core::lindblad::{
    check_decoherence, default_step, default_time_cap, integrate_lindblad, superoperator_spectrum,
    SPECTRUM_TOL,
};
use collapse_core::linalg::{commutant, conditional_expectation, ComplexMatrix};
use collapse_core::purification::{
    classify_subsimplex, integrate_purification_observed, lambda_max, lipschitz_constant,
    OutcomeStatus, Subsimplex,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::config::{
    load_config, BornConfig, CheckConfig, CombinedConfig, ConfigError, DecohereConfig,
    InterruptConfig, PurifyConfig,
};
use crate::runner::{self, THREADS_ENV};

#[derive(Debug, Parser)]
#[command(name = "collapse-sim", version, about = "Decoherence and purification experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config for the subcommand; the built-in demo config if omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (default stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Directory for CSV trajectories and trial ledgers.
    #[arg(long, global = true)]
    pub trace_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Worker threads for trial loops; 0 uses every core.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Lindblad evolution of a state towards its decohered form.
    Decohere,
    /// One run of the nonlinear flow on the simplex.
    Purify,
    /// Outcome statistics over uniformly drawn external states.
    Born,
    /// Lindblad and nonlinear dynamics in one equation.
    Combined,
    /// Experiments interrupted and restarted with a fresh external state.
    Interrupt,
    /// Decoherence conditions and generator spectrum.
    Check,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Decohere => "decohere",
            Command::Purify => "purify",
            Command::Born => "born",
            Command::Combined => "combined",
            Command::Interrupt => "interrupt",
            Command::Check => "check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] collapse_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Core(collapse_core::Error::NonConvergence { .. }) => 3,
            _ => 4,
        }
    }
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Serialize)]
struct Report<'a, C, R> {
    command: &'static str,
    config: &'a C,
    result: R,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
    wall_time_ms: u64,
}

type Table = Vec<Vec<String>>;

/// What a command produced: the JSON result and its CSV table.
struct Artifacts<R> {
    result: R,
    warnings: Vec<String>,
    table_name: &'static str,
    table: Table,
    exit: u8,
}

fn load_or_default<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T, ConfigError> {
    match path {
        Some(p) => load_config(p),
        None => Ok(T::default()),
    }
}

fn reject_flag(cli: &Cli, flag: &'static str, present: bool) -> Result<(), ConfigError> {
    if present {
        return Err(ConfigError::Invalid {
            field: flag,
            reason: format!("does not apply to `{}`", cli.command.name()),
        });
    }
    Ok(())
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> Result<u8, AppError> {
    let start = Instant::now();
    let threads = cli.threads.unwrap_or(0);
    match cli.command {
        Command::Decohere | Command::Purify | Command::Check => {
            reject_flag(cli, "--seed", cli.seed.is_some())?;
            reject_flag(cli, "--trials", cli.trials.is_some())?;
        }
        _ => {}
    }
    match cli.command {
        Command::Decohere => {
            let mut config: DecohereConfig = load_or_default(&cli.config)?;
            let artifacts = decohere(&mut config)?;
            finish(cli, &config, artifacts, start)
        }
        Command::Purify => {
            let mut config: PurifyConfig = load_or_default(&cli.config)?;
            let artifacts = purify(&mut config)?;
            finish(cli, &config, artifacts, start)
        }
        Command::Born => {
            let mut config: BornConfig = load_or_default(&cli.config)?;
            config.seed = cli.seed.unwrap_or(config.seed);
            config.trials = cli.trials.unwrap_or(config.trials);
            let artifacts = born(&mut config, threads)?;
            finish(cli, &config, artifacts, start)
        }
        Command::Interrupt => {
            let mut config: InterruptConfig = load_or_default(&cli.config)?;
            config.seed = cli.seed.unwrap_or(config.seed);
            config.trials = cli.trials.unwrap_or(config.trials);
            let artifacts = interrupt(&mut config, threads)?;
            finish(cli, &config, artifacts, start)
        }
        Command::Combined => {
            let mut config: CombinedConfig = load_or_default(&cli.config)?;
            config.seed = cli.seed.unwrap_or(config.seed);
            config.trials = cli.trials.unwrap_or(config.trials);
            let artifacts = combined(&mut config, threads)?;
            finish(cli, &config, artifacts, start)
        }
        Command::Check => {
            let config: CheckConfig = load_or_default(&cli.config)?;
            let artifacts = check(&config)?;
            finish(cli, &config, artifacts, start)
        }
    }
}

fn finish<C: Serialize, R: Serialize>(
    cli: &Cli,
    config: &C,
    artifacts: Artifacts<R>,
    start: Instant,
) -> Result<u8, AppError> {
    for w in &artifacts.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = &cli.trace_dir {
        fs::create_dir_all(dir).map_err(|source| io_error(dir, source))?;
        let path = dir.join(artifacts.table_name);
        let bytes = csv_bytes(&artifacts.table)?;
        fs::write(&path, bytes).map_err(|source| io_error(&path, source))?;
    }
    let bytes = match cli.format {
        Format::Csv => csv_bytes(&artifacts.table)?,
        Format::Json => {
            let report = Report {
                command: cli.command.name(),
                config,
                result: artifacts.result,
                warnings: artifacts.warnings,
                wall_time_ms: start.elapsed().as_millis() as u64,
            };
            let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
            text.push('\n');
            text.into_bytes()
        }
    };
    match &cli.out {
        Some(path) => fs::write(path, bytes).map_err(|source| io_error(path, source))?,
        None => io::stdout()
            .write_all(&bytes)
            .map_err(|source| io_error(Path::new("<stdout>"), source))?,
    }
    Ok(artifacts.exit)
}

fn io_error(path: &Path, source: io::Error) -> AppError {
    AppError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_bytes(table: &Table) -> Result<Vec<u8>, AppError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in table {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| AppError::Csv(e.into_error().into()))
}

fn entries(m: &ComplexMatrix) -> Vec<[f64; 2]> {
    m.to_row_major().iter().map(|z| [z.re, z.im]).collect()
}

fn outcome_cell(outcome: Option<usize>) -> String {
    outcome.map_or_else(|| "unresolved".into(), |i| i.to_string())
}

fn time_cell(t: Option<f64>) -> String {
    t.map(|t| t.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct DecoherenceFlags {
    generated_algebra_matches: bool,
    all_initial_converge: bool,
}

#[derive(Serialize)]
struct DecohereResult {
    final_time: f64,
    steps: usize,
    final_state: Vec<[f64; 2]>,
    decohered_initial_state: Vec<[f64; 2]>,
    distance_to_decohered: f64,
    decoherence: DecoherenceFlags,
}

fn decoherence_warnings(flags: &DecoherenceFlags) -> Vec<String> {
    let mut w = Vec::new();
    if !flags.generated_algebra_matches {
        w.push("generated algebra differs from the observable algebra; stationary states are not the decohered states".into());
    }
    if !flags.all_initial_converge {
        w.push("jump operators generate a smaller algebra than the full generator; some states do not converge".into());
    }
    w
}

fn decohere(config: &mut DecohereConfig) -> Result<Artifacts<DecohereResult>, AppError> {
    let setup = config.build()?;
    let spectrum = superoperator_spectrum(&setup.lindblad, SPECTRUM_TOL)?;
    let t_final = *config.t_final.get_or_insert(default_time_cap(&spectrum));
    let dt = *config.dt.get_or_insert(default_step(&spectrum));
    let report = check_decoherence(&setup.lindblad, &setup.obs)?;
    let flags = DecoherenceFlags {
        generated_algebra_matches: report.generated_algebra_matches,
        all_initial_converge: report.all_initial_converge,
    };
    let target = conditional_expectation(&setup.rho0, &setup.obs)?;
    let traj = integrate_lindblad(&setup.rho0, &setup.lindblad, t_final, dt)?;

    let n = setup.rho0.dim();
    let mut header = vec!["t".to_string()];
    for i in 0..n {
        for j in 0..n {
            header.push(format!("rho_{i}_{j}_re"));
            header.push(format!("rho_{i}_{j}_im"));
        }
    }
    header.push("distance_to_decohered".into());
    let mut table = vec![header];
    for (t, rho) in traj.points() {
        let mut row = vec![t.to_string()];
        for z in rho.matrix().to_row_major() {
            row.push(z.re.to_string());
            row.push(z.im.to_string());
        }
        row.push(rho.frobenius_distance(&target).to_string());
        table.push(row);
    }

    let final_state = traj.final_state();
    Ok(Artifacts {
        warnings: decoherence_warnings(&flags),
        result: DecohereResult {
            final_time: traj.final_time(),
            steps: traj.points().len() - 1,
            final_state: entries(final_state.matrix()),
            decohered_initial_state: entries(target.matrix()),
            distance_to_decohered: final_state.frobenius_distance(&target),
            decoherence: flags,
        },
        table_name: "trajectory.csv",
        table,
        exit: EXIT_OK,
    })
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum Domain {
    Interior(usize),
    Boundary(Vec<usize>),
}

impl From<Subsimplex> for Domain {
    fn from(s: Subsimplex) -> Self {
        match s {
            Subsimplex::Interior(i) => Domain::Interior(i),
            Subsimplex::Boundary(v) => Domain::Boundary(v),
        }
    }
}

#[derive(Serialize)]
struct PurifyResult {
    status: &'static str,
    outcome: Option<usize>,
    final_point: Vec<f64>,
    t_elapsed: f64,
    steps: usize,
    lambda_initial: f64,
    domain: Domain,
    lipschitz_constant: Option<f64>,
    born: Vec<f64>,
    /// The external state lies on the boundary of the simplex.
    boundary_external: bool,
}

fn purify(config: &mut PurifyConfig) -> Result<Artifacts<PurifyResult>, AppError> {
    let setup = config.resolve()?;
    let a = config.a;
    let m = setup.mu0.m();
    let mut header = vec!["t".to_string()];
    header.extend((0..m).map(|k| format!("r_{k}")));
    header.push("lambda".into());
    let mut table = vec![header];
    let ext = setup.mu_ext.coords().to_vec();
    let run = integrate_purification_observed(&setup.mu0, &setup.mu_ext, a, &setup.options, |t, r| {
        let mut row = vec![t.to_string()];
        row.extend(r.iter().map(|x| x.to_string()));
        let lambda = r
            .iter()
            .zip(&ext)
            .filter(|(&rk, _)| rk > 0.0)
            .map(|(rk, sk)| sk / rk)
            .fold(1.0, f64::min);
        row.push(lambda.to_string());
        table.push(row);
    })?;
    let domain = classify_subsimplex(&setup.mu0, &setup.mu_ext)?;
    let lipschitz = match &domain {
        Subsimplex::Interior(i) => lipschitz_constant(&setup.mu_ext, *i, a).ok(),
        Subsimplex::Boundary(_) => None,
    };
    let mut warnings = Vec::new();
    let boundary_external = !setup.mu_ext.is_interior();
    if boundary_external {
        warnings.push("mu_ext lies on the boundary of the simplex; convergence to a vertex is not guaranteed".into());
    }
    let exit = match run.status {
        OutcomeStatus::Converged(_) => EXIT_OK,
        OutcomeStatus::Unresolved => {
            warnings.push(format!("no vertex reached before t = {}", run.t_elapsed));
            EXIT_NOT_CONVERGED
        }
    };
    Ok(Artifacts {
        result: PurifyResult {
            status: match run.status {
                OutcomeStatus::Converged(_) => "converged",
                OutcomeStatus::Unresolved => "unresolved",
            },
            outcome: run.status.index(),
            final_point: run.final_point.coords().to_vec(),
            t_elapsed: run.t_elapsed,
            steps: run.steps,
            lambda_initial: lambda_max(&setup.mu0, &setup.mu_ext)?,
            domain: domain.into(),
            lipschitz_constant: lipschitz,
            born: setup.mu0.coords().to_vec(),
            boundary_external,
        },
        warnings,
        table_name: "trajectory.csv",
        table,
        exit,
    })
}

#[derive(Serialize)]
struct StatsResult {
    trials: usize,
    counts: Vec<usize>,
    unresolved: usize,
    frequencies: Vec<f64>,
    born: Vec<f64>,
    stderr: Vec<f64>,
    max_abs_dev: f64,
    chi_square: f64,
    oracle_mismatches: usize,
    within_4_sigma: bool,
}

impl From<&OutcomeStats> for StatsResult {
    fn from(s: &OutcomeStats) -> Self {
        Self {
            trials: s.trials,
            counts: s.counts.clone(),
            unresolved: s.unresolved,
            frequencies: s.frequencies.clone(),
            born: s.born.clone(),
            stderr: s.stderr.clone(),
            max_abs_dev: s.max_abs_dev,
            chi_square: s.chi_square,
            oracle_mismatches: s.oracle_mismatches,
            within_4_sigma: s.within_sigma(4.0),
        }
    }
}

fn predicted_cell(p: &Subsimplex) -> String {
    match p {
        Subsimplex::Interior(i) => i.to_string(),
        Subsimplex::Boundary(_) => "boundary".into(),
    }
}

fn ledger(records: &[TrialRecord]) -> Table {
    let mut table = vec![vec![
        "trial_id".to_string(),
        "outcome".into(),
        "t_converged".into(),
        "predicted".into(),
        "steps".into(),
    ]];
    for r in records {
        table.push(vec![
            r.trial.to_string(),
            outcome_cell(r.outcome),
            time_cell(r.t_converged),
            predicted_cell(&r.predicted),
            r.steps.to_string(),
        ]);
    }
    table
}

fn born(config: &mut BornConfig, threads: usize) -> Result<Artifacts<StatsResult>, AppError> {
    let setup = config.resolve()?;
    let (stats, records) =
        runner::born_experiment(&setup.mu0, config.trials, config.seed, &setup.options, threads)?;
    let mut warnings = Vec::new();
    if stats.oracle_mismatches > 0 {
        warnings.push(format!(
            "{} resolved trials disagree with the geometric classification",
            stats.oracle_mismatches
        ));
    }
    Ok(Artifacts {
        result: (&stats).into(),
        warnings,
        table_name: "ledger.csv",
        table: ledger(&records),
        exit: EXIT_OK,
    })
}

#[derive(Serialize)]
struct InterruptResult {
    t_interrupt: f64,
    #[serde(flatten)]
    stats: StatsResult,
    intermediate_mean: Vec<f64>,
    intermediate_stderr: Vec<f64>,
    intermediate_mean_within_4_sigma: bool,
    /// `max_i |frequency_i - mean_i r_i(t_interrupt)|`.
    total_probability_max_dev: f64,
}

fn interrupt(config: &mut InterruptConfig, threads: usize) -> Result<Artifacts<InterruptResult>, AppError> {
    let (setup, t_interrupt) = config.resolve()?;
    let (stats, records) = runner::interrupted_experiment(
        &setup.mu0,
        t_interrupt,
        config.trials,
        config.seed,
        &setup.options,
        threads,
    )?;
    let total_probability_max_dev = stats
        .stats
        .frequencies
        .iter()
        .zip(&stats.intermediate_mean)
        .map(|(f, m)| (f - m).abs())
        .fold(0.0, f64::max);
    let m = setup.mu0.m();
    let mut header = vec!["trial_id".to_string(), "outcome".into(), "t_converged".into()];
    header.extend((0..m).map(|k| format!("r_{k}_interrupt")));
    let mut table = vec![header];
    for InterruptedRecord { intermediate, restart } in &records {
        let mut row = vec![
            restart.trial.to_string(),
            outcome_cell(restart.outcome),
            time_cell(restart.t_converged),
        ];
        row.extend(intermediate.coords().iter().map(|x| x.to_string()));
        table.push(row);
    }
    Ok(Artifacts {
        result: InterruptResult {
            t_interrupt,
            stats: (&stats.stats).into(),
            intermediate_mean_within_4_sigma: stats.mean_within_sigma(4.0),
            intermediate_mean: stats.intermediate_mean,
            intermediate_stderr: stats.intermediate_stderr,
            total_probability_max_dev,
        },
        warnings: Vec::new(),
        table_name: "ledger.csv",
        table,
        exit: EXIT_OK,
    })
}

#[derive(Serialize)]
struct CombinedResult {
    #[serde(flatten)]
    stats: StatsResult,
    psd_repairs: usize,
}

fn combined(config: &mut CombinedConfig, threads: usize) -> Result<Artifacts<CombinedResult>, AppError> {
    let setup = config.resolve()?;
    let runs: Vec<CombinedTrial> = runner::combined_trials(
        &setup.rho0,
        &setup.spec,
        config.trials,
        config.seed,
        &setup.options,
        threads,
    )?;
    let stats = combined_stats(&setup.rho0, setup.spec.observable(), &runs)?;
    let records: Vec<TrialRecord> = runs.iter().map(|r| r.record.clone()).collect();
    let mut table = ledger(&records);
    table[0].push("psd_repairs".into());
    for (row, run) in table.iter_mut().skip(1).zip(&runs) {
        row.push(run.psd_repairs.to_string());
    }
    Ok(Artifacts {
        result: CombinedResult {
            stats: (&stats).into(),
            psd_repairs: runs.iter().map(|r| r.psd_repairs).sum(),
        },
        warnings: Vec::new(),
        table_name: "ledger.csv",
        table,
        exit: EXIT_OK,
    })
}

#[derive(Serialize)]
struct CheckResult {
    generated_algebra_matches: bool,
    all_initial_converge: bool,
    generated_algebra_dim: usize,
    jump_algebra_dim: usize,
    observable_algebra_dim: usize,
    /// Dimension of the commutant of the jump operators.
    jump_commutant_dim: usize,
    eigenvalues: Vec<[f64; 2]>,
    max_real_part: f64,
    zero_subspace_dim: usize,
    zero_real_dim: usize,
}

fn check(config: &CheckConfig) -> Result<Artifacts<CheckResult>, AppError> {
    let (obs, lindblad) = config.build()?;
    let report = check_decoherence(&lindblad, &obs)?;
    let spectrum = superoperator_spectrum(&lindblad, SPECTRUM_TOL)?;
    let jump_commutant_dim = if lindblad.jump_ops().is_empty() {
        obs.dim() * obs.dim()
    } else {
        commutant(lindblad.jump_ops())?.dim()
    };
    let mut table = vec![vec!["re".to_string(), "im".into()]];
    table.extend(spectrum.eigenvalues.iter().map(|z| vec![z.re.to_string(), z.im.to_string()]));
    let flags = DecoherenceFlags {
        generated_algebra_matches: report.generated_algebra_matches,
        all_initial_converge: report.all_initial_converge,
    };
    Ok(Artifacts {
        warnings: decoherence_warnings(&flags),
        result: CheckResult {
            generated_algebra_matches: report.generated_algebra_matches,
            all_initial_converge: report.all_initial_converge,
            generated_algebra_dim: report.generated.dim(),
            jump_algebra_dim: report.jump_algebra.dim(),
            observable_algebra_dim: report.observable_algebra.dim(),
            jump_commutant_dim,
            eigenvalues: spectrum.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            max_real_part: spectrum.max_real_part(),
            zero_subspace_dim: spectrum.zero_subspace_dim,
            zero_real_dim: spectrum.zero_real_dim,
        },
        table_name: "spectrum.csv",
        table,
        exit: EXIT_OK,
    })
}
