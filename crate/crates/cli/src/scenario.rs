//! Scenario files: a JSON document describing one system, one monitored
//! path, and the run to perform on it.
//!
//! Complex numbers are `[re, im]` pairs or bare reals; matrices are
//! row-major nested lists of them.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use zeno_dark_core::{
    CVector, Complex64, HermitianOperator, ModePath, MonitoredPath, Propagator, SampledPath,
    StateVector,
};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Pair([f64; 2]),
    Real(f64),
}

impl From<ComplexSpec> for Complex64 {
    fn from(c: ComplexSpec) -> Self {
        match c {
            ComplexSpec::Pair([re, im]) => Complex64::new(re, im),
            ComplexSpec::Real(re) => Complex64::new(re, 0.0),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Rows(Vec<Vec<ComplexSpec>>),
    Diagonal { diagonal: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    /// `f(t) = e^{-iKt} f0`
    Generator {
        generator: MatrixSpec,
        initial: Vec<ComplexSpec>,
    },
    /// `f(t) = sum_k a_k e^{-i omega_k t} |m_k>`; modes default to the
    /// standard basis.
    Modes {
        amplitudes: Vec<ComplexSpec>,
        frequencies: Vec<f64>,
        #[serde(default)]
        modes: Option<Vec<Vec<ComplexSpec>>>,
    },
    Sampled {
        times: Vec<f64>,
        states: Vec<Vec<ComplexSpec>>,
    },
    /// Monitored state designed to steer the mode trajectory
    /// `psi(t) = sum_j sqrt(p_j) e^{-i nu_j t} |j>`.
    Designed {
        probabilities: Vec<f64>,
        frequencies: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Discrete,
    Continuous,
    ClosedForm,
    Embedded,
    Inverse,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub mode: Mode,
    #[serde(rename = "T", default)]
    pub t_final: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(rename = "M", default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(rename = "E", default)]
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Tau,
    #[serde(rename = "E")]
    Energy,
    Dt,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub dimension: usize,
    /// Normalized at parse time. Optional for designed paths, where the
    /// target's initial state is used.
    #[serde(default)]
    pub initial_state: Option<Vec<ComplexSpec>>,
    #[serde(default = "zero_hamiltonian")]
    pub hamiltonian: MatrixSpec,
    pub path: PathSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub propagator: Option<String>,
}

fn zero_hamiltonian() -> MatrixSpec {
    MatrixSpec::Named("zero".into())
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let scenario: Scenario = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid scenario: {e}")))?;
        if scenario.dimension < 2 {
            return Err(CliError::Config("dimension must be at least 2".into()));
        }
        if scenario.name.is_empty()
            || !scenario
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            return Err(CliError::Config(format!(
                "name {:?} must be nonempty and use only [A-Za-z0-9._-]",
                scenario.name
            )));
        }
        Ok(scenario)
    }

    pub fn propagator(&self) -> Result<Propagator, CliError> {
        match &self.propagator {
            None => Ok(Propagator::default()),
            Some(name) => name.parse().map_err(CliError::Config),
        }
    }

    pub fn hamiltonian(&self) -> Result<HermitianOperator, CliError> {
        matrix(&self.hamiltonian, self.dimension, "hamiltonian")
    }

    /// The user-supplied initial state, normalized.
    pub fn initial_state(&self) -> Result<Option<StateVector>, CliError> {
        self.initial_state
            .as_ref()
            .map(|v| state(v, self.dimension, "initial_state", true))
            .transpose()
    }

    /// Target probabilities and frequencies for designed paths.
    pub fn designed_target(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.path {
            PathSpec::Designed {
                probabilities,
                frequencies,
            } => Some((probabilities.clone(), frequencies.clone())),
            _ => None,
        }
    }

    /// Builds the non-designed path variants; designed paths need the
    /// Hamiltonian and are built by the runner.
    pub fn explicit_path(&self) -> Result<MonitoredPath, CliError> {
        let n = self.dimension;
        match &self.path {
            PathSpec::Generator { generator, initial } => {
                let k = matrix(generator, n, "path.generator")?;
                let f0 = state(initial, n, "path.initial", false)?;
                Ok(MonitoredPath::generator(k, f0)?)
            }
            PathSpec::Modes {
                amplitudes,
                frequencies,
                modes,
            } => {
                let amps: Vec<Complex64> = amplitudes.iter().map(|&c| c.into()).collect();
                if amps.len() != frequencies.len() {
                    return Err(CliError::Config(format!(
                        "path: {} amplitudes for {} frequencies",
                        amps.len(),
                        frequencies.len()
                    )));
                }
                let path = match modes {
                    None => {
                        if amps.len() != n {
                            return Err(CliError::Config(format!(
                                "path: {} amplitudes in dimension {n}",
                                amps.len()
                            )));
                        }
                        ModePath::in_standard_basis(amps, frequencies.clone())?
                    }
                    Some(modes) => {
                        let modes = modes
                            .iter()
                            .map(|m| state(m, n, "path.modes", false))
                            .collect::<Result<Vec<_>, _>>()?;
                        ModePath::new(amps, frequencies.clone(), modes)?
                    }
                };
                Ok(MonitoredPath::Mode(path))
            }
            PathSpec::Sampled { times, states } => {
                let samples = states
                    .iter()
                    .map(|s| state(s, n, "path.states", false))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(MonitoredPath::Sampled(SampledPath::new(
                    times.clone(),
                    samples,
                )?))
            }
            PathSpec::Designed { .. } => Err(CliError::Config(
                "designed paths are built from the target trajectory".into(),
            )),
        }
    }
}

fn state(
    values: &[ComplexSpec],
    n: usize,
    field: &str,
    normalize: bool,
) -> Result<StateVector, CliError> {
    if values.len() != n {
        return Err(CliError::Config(format!(
            "{field}: expected {n} components, found {}",
            values.len()
        )));
    }
    let v: Vec<Complex64> = values.iter().map(|&c| c.into()).collect();
    let result = if normalize {
        StateVector::normalized(v)
    } else {
        StateVector::from_vector(CVector::from_vec(v)).and_then(|s| {
            if s.is_unit(zeno_dark_core::Tolerances::DEFAULT.unit_norm) {
                Ok(s)
            } else {
                Err(zeno_dark_core::Error::Normalization { norm: s.norm() })
            }
        })
    };
    result.map_err(|e| CliError::Config(format!("{field}: {e}")))
}

fn matrix(spec: &MatrixSpec, n: usize, field: &str) -> Result<HermitianOperator, CliError> {
    let op = match spec {
        MatrixSpec::Named(name) if name == "zero" => return Ok(HermitianOperator::zeros(n)),
        MatrixSpec::Named(name) => {
            return Err(CliError::Config(format!(
                "{field}: unknown matrix {name:?}; use \"zero\", a row list or {{\"diagonal\": [...]}}"
            )))
        }
        MatrixSpec::Diagonal { diagonal } => {
            if diagonal.len() != n {
                return Err(CliError::Config(format!(
                    "{field}: diagonal has {} entries in dimension {n}",
                    diagonal.len()
                )));
            }
            HermitianOperator::from_real_diagonal(diagonal)
        }
        MatrixSpec::Rows(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(CliError::Config(format!("{field}: expected an {n}x{n} matrix")));
            }
            let rows: Vec<Vec<Complex64>> = rows
                .iter()
                .map(|r| r.iter().map(|&c| c.into()).collect())
                .collect();
            HermitianOperator::from_rows(&rows)
                .map_err(|e| CliError::Config(format!("{field}: {e}")))?
        }
    };
    Ok(op)
}
