//! JSON experiment configurations.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major lists of
//! them. Unknown keys are rejected. Each config resolves to a copy with every
//! default filled in, which is what runs echo back.

use std::fs;
use std::path::Path;

use collapse_core::harness::Mode;
use collapse_core::lindblad::LindbladSpec;
use collapse_core::linalg::{ComplexMatrix, DensityMatrix, HermitianOperator, Observable};
use collapse_core::purification::{PurificationOptions, DEFAULT_CONV_TOL, DEFAULT_T_CAP_RATE_UNITS};
use collapse_core::simplex::SimplexPoint;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ComplexEntry = [f64; 2];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.to_string(),
    }
}

/// Parses a config of type `T` from JSON text.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    serde_json::from_str(text).map_err(|source| ConfigError::Parse {
        context: "config".into(),
        source,
    })
}

pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        context: path.display().to_string(),
        source,
    })
}

/// An observable: a named preset or explicit entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    SigmaX,
    SigmaY,
    SigmaZ,
    /// `diag(0, 1, …, n-1)`.
    Ladder,
    Diagonal(Vec<f64>),
    Matrix(Vec<ComplexEntry>),
}

impl ObservableConfig {
    pub fn build(&self, n: usize) -> Result<Observable, ConfigError> {
        let qubit = |m: ComplexMatrix| -> Result<Observable, ConfigError> {
            if n != 2 {
                return Err(invalid("observable", format!("Pauli presets need n = 2, got n = {n}")));
            }
            Ok(Observable::new(
                HermitianOperator::new(m).map_err(|e| invalid("observable", e))?,
            ))
        };
        match self {
            ObservableConfig::SigmaX => qubit(ComplexMatrix::pauli_x()),
            ObservableConfig::SigmaY => qubit(ComplexMatrix::pauli_y()),
            ObservableConfig::SigmaZ => qubit(ComplexMatrix::pauli_z()),
            ObservableConfig::Ladder => {
                let values: Vec<f64> = (0..n).map(|k| k as f64).collect();
                Ok(Observable::from_diagonal(&values))
            }
            ObservableConfig::Diagonal(values) => {
                if values.len() != n {
                    return Err(invalid("observable", format!("{} diagonal entries for n = {n}", values.len())));
                }
                Ok(Observable::from_diagonal(values))
            }
            ObservableConfig::Matrix(entries) => {
                let m = matrix(n, entries).map_err(|e| invalid("observable", e))?;
                Ok(Observable::new(
                    HermitianOperator::new(m).map_err(|e| invalid("observable", e))?,
                ))
            }
        }
    }
}

/// A Lindblad generator. Presets use the spectral projections `P_k` of the
/// observable as jump operators `√γ_k P_k`; `dephasing` adds `H = A`,
/// `pure_dephasing` has `H = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum LindbladConfig {
    Dephasing {
        rates: Vec<f64>,
    },
    PureDephasing {
        rates: Vec<f64>,
    },
    Explicit {
        hamiltonian: Vec<ComplexEntry>,
        #[serde(default)]
        jumps: Vec<Vec<ComplexEntry>>,
    },
}

impl LindbladConfig {
    pub fn build(&self, obs: &Observable) -> Result<LindbladSpec, ConfigError> {
        let n = obs.dim();
        match self {
            LindbladConfig::Dephasing { rates } => {
                LindbladSpec::dephasing(obs, rates).map_err(|e| invalid("lindblad.rates", e))
            }
            LindbladConfig::PureDephasing { rates } => {
                LindbladSpec::pure_dephasing(obs, rates).map_err(|e| invalid("lindblad.rates", e))
            }
            LindbladConfig::Explicit { hamiltonian, jumps } => {
                let h = matrix(n, hamiltonian)
                    .and_then(HermitianOperator::new)
                    .map_err(|e| invalid("lindblad.hamiltonian", e))?;
                let jumps = jumps
                    .iter()
                    .map(|v| matrix(n, v))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| invalid("lindblad.jumps", e))?;
                LindbladSpec::new(h, jumps).map_err(|e| invalid("lindblad", e))
            }
        }
    }
}

/// An initial density matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateConfig {
    MaximallyMixed,
    UniformSuperposition,
    /// The basis state `|k⟩⟨k|`.
    Basis(usize),
    Diagonal(Vec<f64>),
    /// `|ψ⟩⟨ψ|` for the normalized amplitudes.
    Pure(Vec<ComplexEntry>),
    Matrix(Vec<ComplexEntry>),
}

impl StateConfig {
    pub fn build(&self, n: usize) -> Result<DensityMatrix, ConfigError> {
        let err = |e| invalid("rho0", e);
        match self {
            StateConfig::MaximallyMixed => Ok(DensityMatrix::maximally_mixed(n)),
            StateConfig::UniformSuperposition => Ok(DensityMatrix::uniform_superposition(n)),
            StateConfig::Basis(k) => {
                if *k >= n {
                    return Err(invalid("rho0", format!("basis index {k} out of range for n = {n}")));
                }
                let mut w = vec![0.0; n];
                w[*k] = 1.0;
                DensityMatrix::from_diagonal(&w).map_err(err)
            }
            StateConfig::Diagonal(w) => {
                check_len("rho0", w.len(), n)?;
                DensityMatrix::from_diagonal(w).map_err(err)
            }
            StateConfig::Pure(amps) => {
                check_len("rho0", amps.len(), n)?;
                let amps: Vec<Complex64> = amps.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
                DensityMatrix::pure(&amps).map_err(err)
            }
            StateConfig::Matrix(entries) => {
                let m = matrix(n, entries).map_err(err)?;
                DensityMatrix::from_matrix(m).map_err(err)
            }
        }
    }
}

fn check_len(field: &'static str, found: usize, expected: usize) -> Result<(), ConfigError> {
    if found != expected {
        return Err(invalid(field, format!("expected {expected} entries, found {found}")));
    }
    Ok(())
}

fn matrix(n: usize, entries: &[ComplexEntry]) -> collapse_core::Result<ComplexMatrix> {
    let entries: Vec<Complex64> = entries.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
    ComplexMatrix::from_row_major(n, &entries)
}

fn simplex(field: &'static str, coords: &[f64], m: usize) -> Result<SimplexPoint, ConfigError> {
    check_len(field, coords.len(), m)?;
    SimplexPoint::new(coords.to_vec()).map_err(|e| invalid(field, e))
}

fn positive(field: &'static str, x: f64) -> Result<f64, ConfigError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(invalid(field, format!("must be positive and finite, got {x}")));
    }
    Ok(x)
}

fn check_m(m: usize) -> Result<(), ConfigError> {
    if m < 2 {
        return Err(invalid("m", "need at least two outcomes"));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<(), ConfigError> {
    if n < 1 {
        return Err(invalid("n", "must be at least 1"));
    }
    Ok(())
}

fn check_trials(trials: usize) -> Result<(), ConfigError> {
    if trials < 1 {
        return Err(invalid("trials", "must be at least 1"));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    #[default]
    FullOde,
    ClassifyOnly,
}

impl From<ModeConfig> for Mode {
    fn from(m: ModeConfig) -> Self {
        match m {
            ModeConfig::FullOde => Mode::FullOde,
            ModeConfig::ClassifyOnly => Mode::ClassifyOnly,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_trials() -> usize {
    100_000
}

/// Integrator tolerances shared by the simplex flow configs.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
}

impl Tolerances {
    fn resolve(&mut self, a: f64) -> Result<PurificationOptions, ConfigError> {
        let mut o = PurificationOptions::for_rate(a);
        o.conv_tol = positive("tolerances.conv_tol", *self.conv_tol.get_or_insert(DEFAULT_CONV_TOL))?;
        o.t_cap = positive("tolerances.t_cap", *self.t_cap.get_or_insert(DEFAULT_T_CAP_RATE_UNITS / a))?;
        o.step.abs_tol = positive("tolerances.abs_tol", *self.abs_tol.get_or_insert(o.step.abs_tol))?;
        o.step.rel_tol = positive("tolerances.rel_tol", *self.rel_tol.get_or_insert(o.step.rel_tol))?;
        Ok(o)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecohereConfig {
    pub n: usize,
    pub observable: ObservableConfig,
    pub lindblad: LindbladConfig,
    pub rho0: StateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl Default for DecohereConfig {
    fn default() -> Self {
        Self {
            n: 2,
            observable: ObservableConfig::SigmaZ,
            lindblad: LindbladConfig::Dephasing { rates: vec![1.0, 1.0] },
            rho0: StateConfig::UniformSuperposition,
            t_final: Some(50.0),
            dt: Some(0.01),
        }
    }
}

pub struct DecohereSetup {
    pub obs: Observable,
    pub lindblad: LindbladSpec,
    pub rho0: DensityMatrix,
}

impl DecohereConfig {
    /// Validates and builds; `t_final` and `dt` are left for the caller to
    /// default from the generator spectrum.
    pub fn build(&self) -> Result<DecohereSetup, ConfigError> {
        check_n(self.n)?;
        let obs = self.observable.build(self.n)?;
        let lindblad = self.lindblad.build(&obs)?;
        let rho0 = self.rho0.build(self.n)?;
        if let Some(t) = self.t_final {
            positive("t_final", t)?;
        }
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        Ok(DecohereSetup { obs, lindblad, rho0 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PurifyConfig {
    pub m: usize,
    pub mu0: Vec<f64>,
    pub mu_ext: Vec<f64>,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Default for PurifyConfig {
    fn default() -> Self {
        let third = 1.0 / 3.0;
        Self {
            m: 3,
            mu0: vec![third, third, third],
            mu_ext: vec![0.2, 0.3, 0.5],
            a: 1.0,
            tolerances: Tolerances::default(),
        }
    }
}

pub struct PurifySetup {
    pub mu0: SimplexPoint,
    pub mu_ext: SimplexPoint,
    pub options: PurificationOptions,
}

impl PurifyConfig {
    pub fn resolve(&mut self) -> Result<PurifySetup, ConfigError> {
        check_m(self.m)?;
        let mu0 = simplex("mu0", &self.mu0, self.m)?;
        let mu_ext = simplex("mu_ext", &self.mu_ext, self.m)?;
        let a = positive("a", self.a)?;
        let options = self.tolerances.resolve(a)?;
        Ok(PurifySetup { mu0, mu_ext, options })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BornConfig {
    pub m: usize,
    pub mu0: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Default for BornConfig {
    fn default() -> Self {
        Self {
            m: 3,
            mu0: vec![0.2, 0.3, 0.5],
            trials: default_trials(),
            a: 1.0,
            seed: 42,
            mode: ModeConfig::FullOde,
            tolerances: Tolerances::default(),
        }
    }
}

pub struct BornSetup {
    pub mu0: SimplexPoint,
    pub options: collapse_core::harness::HarnessOptions,
}

impl BornConfig {
    pub fn resolve(&mut self) -> Result<BornSetup, ConfigError> {
        check_m(self.m)?;
        check_trials(self.trials)?;
        let mu0 = simplex("mu0", &self.mu0, self.m)?;
        let a = positive("a", self.a)?;
        let purification = self.tolerances.resolve(a)?;
        Ok(BornSetup {
            mu0,
            options: collapse_core::harness::HarnessOptions {
                a,
                mode: self.mode.into(),
                purification,
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterruptConfig {
    pub m: usize,
    pub mu0: Vec<f64>,
    pub t_interrupt: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Default for InterruptConfig {
    fn default() -> Self {
        let b = BornConfig::default();
        Self {
            m: b.m,
            mu0: b.mu0,
            t_interrupt: 0.5,
            trials: b.trials,
            a: b.a,
            seed: b.seed,
            mode: b.mode,
            tolerances: b.tolerances,
        }
    }
}

impl InterruptConfig {
    pub fn resolve(&mut self) -> Result<(BornSetup, f64), ConfigError> {
        if !(self.t_interrupt >= 0.0) || !self.t_interrupt.is_finite() {
            return Err(invalid("t_interrupt", "must be non-negative and finite"));
        }
        let mut born = BornConfig {
            m: self.m,
            mu0: self.mu0.clone(),
            trials: self.trials,
            a: self.a,
            seed: self.seed,
            mode: self.mode,
            tolerances: self.tolerances,
        };
        let setup = born.resolve()?;
        self.tolerances = born.tolerances;
        Ok((setup, self.t_interrupt))
    }
}

fn default_combined_a() -> f64 {
    0.01
}

fn default_combined_trials() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinedConfig {
    pub n: usize,
    pub observable: ObservableConfig,
    pub lindblad: LindbladConfig,
    pub rho0: StateConfig,
    #[serde(default = "default_combined_a")]
    pub a: f64,
    #[serde(default = "default_combined_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_cap: Option<f64>,
}

impl Default for CombinedConfig {
    fn default() -> Self {
        let (s0, s1) = (0.3f64.sqrt(), 0.7f64.sqrt());
        Self {
            n: 2,
            observable: ObservableConfig::Ladder,
            lindblad: LindbladConfig::Dephasing { rates: vec![1.0, 1.0] },
            rho0: StateConfig::Pure(vec![[s0, 0.0], [0.0, s1]]),
            a: 0.01,
            trials: 1000,
            seed: 42,
            conv_tol: None,
            t_cap: None,
        }
    }
}

pub struct CombinedSetup {
    pub spec: collapse_core::combined::CombinedSpec,
    pub rho0: DensityMatrix,
    pub options: collapse_core::combined::CombinedOptions,
}

impl CombinedConfig {
    pub fn resolve(&mut self) -> Result<CombinedSetup, ConfigError> {
        use collapse_core::combined::{CombinedOptions, CombinedSpec};
        check_n(self.n)?;
        check_trials(self.trials)?;
        if !(self.a >= 0.0) || !self.a.is_finite() {
            return Err(invalid("a", "must be non-negative and finite"));
        }
        let obs = self.observable.build(self.n)?;
        let lindblad = self.lindblad.build(&obs)?;
        let rho0 = self.rho0.build(self.n)?;
        let m = obs.num_outcomes();
        let placeholder = SimplexPoint::new(vec![1.0 / m as f64; m]).map_err(|e| invalid("observable", e))?;
        let spec = CombinedSpec::new(lindblad, obs, placeholder, self.a).map_err(|e| invalid("lindblad", e))?;
        let mut options = CombinedOptions::for_spec(&spec);
        options.conv_tol = positive("conv_tol", *self.conv_tol.get_or_insert(options.conv_tol))?;
        options.t_cap = positive("t_cap", *self.t_cap.get_or_insert(options.t_cap))?;
        Ok(CombinedSetup { spec, rho0, options })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub n: usize,
    pub observable: ObservableConfig,
    pub lindblad: LindbladConfig,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            n: 2,
            observable: ObservableConfig::SigmaZ,
            lindblad: LindbladConfig::Dephasing { rates: vec![1.0, 1.0] },
        }
    }
}

impl CheckConfig {
    pub fn build(&self) -> Result<(Observable, LindbladSpec), ConfigError> {
        check_n(self.n)?;
        let obs = self.observable.build(self.n)?;
        let lindblad = self.lindblad.build(&obs)?;
        Ok((obs, lindblad))
    }
}
