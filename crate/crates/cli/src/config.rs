//! Experiment configuration: one JSON file per run, documented in
//! `docs/schemas.md`.

use std::fmt;
use std::path::{Path, PathBuf};

use cqpolar::hilbert::Truncation;
use cqpolar::polar::PolarCode;
use cqpolar::qsim::{GateNoise, NoiseConfig, PauliModel};
use cqpolar::rates::{log_grid, AlphaSearch, BaOptions};
use cqpolar::scdecoder::{MultiphotonPolicy, DEFAULT_EIGEN_TOL};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSpec {
    pub n_bins: usize,
    #[serde(default)]
    pub k_info: Option<usize>,
    /// 1-based frozen positions; the built-in set for `n_bins` when absent.
    #[serde(default)]
    pub frozen: Option<Vec<usize>>,
}

impl CodeSpec {
    pub fn build(&self) -> Result<PolarCode, CliError> {
        let code = match (&self.frozen, self.k_info) {
            (None, None) => PolarCode::standard(self.n_bins),
            (None, Some(k)) => PolarCode::standard(self.n_bins).and_then(|c| {
                if c.k_info() == k {
                    Ok(c)
                } else {
                    Err(cqpolar::Error::InvalidArgument(format!(
                        "k_info {k} needs an explicit frozen set for N = {}",
                        self.n_bins
                    )))
                }
            }),
            (Some(frozen), k) => PolarCode::new(self.n_bins, k.unwrap_or(self.n_bins - frozen.len()), frozen),
        };
        code.map_err(|e| CliError::field("code", e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridVariable {
    /// Mean photon number per bin, `α²`.
    Nbar,
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub variable: GridVariable,
    /// Explicit grid; overrides `min`, `max` and `points`.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    /// Log-spaced points between `min` and `max` inclusive.
    #[serde(default)]
    pub points: Option<usize>,
}

impl GridSpec {
    /// Amplitudes in grid order.
    pub fn alphas(&self) -> Result<Vec<f64>, CliError> {
        let values = match &self.values {
            Some(v) => {
                if v.is_empty() {
                    return Err(CliError::field("grid.values", "must not be empty"));
                }
                if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                    return Err(CliError::field("grid.values", format!("{bad} is not positive")));
                }
                v.clone()
            }
            None => {
                let min = self.min.ok_or_else(|| CliError::field("grid.min", "missing"))?;
                let max = self.max.ok_or_else(|| CliError::field("grid.max", "missing"))?;
                let points = self.points.ok_or_else(|| CliError::field("grid.points", "missing"))?;
                if !(min.is_finite() && min > 0.0) {
                    return Err(CliError::field("grid.min", format!("{min} is not positive")));
                }
                if !(max.is_finite() && max >= min) {
                    return Err(CliError::field("grid.max", format!("{max} is below grid.min")));
                }
                if points == 0 {
                    return Err(CliError::field("grid.points", "must be at least 1"));
                }
                log_grid(min, max, points).map_err(|e| CliError::field("grid", e))?
            }
        };
        Ok(match self.variable {
            GridVariable::Alpha => values,
            GridVariable::Nbar => values.into_iter().map(f64::sqrt).collect(),
        })
    }
}

/// Which part of the receiver the swept error probability acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Ideal POVM, no circuit.
    None,
    Transducer,
    Compression,
    Decoding,
    /// Compression and decoding gates together.
    Gates,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::None => "none",
            NoiseKind::Transducer => "transducer",
            NoiseKind::Compression => "compression",
            NoiseKind::Decoding => "decoding",
            NoiseKind::Gates => "gates",
        })
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| CliError::field("noise.kind", format!("unknown kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Gate error model; ignored for `none` and `transducer`.
    #[serde(default)]
    pub model: String,
    /// Error probabilities to sweep; one block of rows per value.
    #[serde(default = "zero_only")]
    pub p: Vec<f64>,
}

fn zero_only() -> Vec<f64> {
    vec![0.0]
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            kind: NoiseKind::None,
            model: PauliModel::Independent.to_string(),
            p: zero_only(),
        }
    }
}

impl NoiseSpec {
    pub fn pauli_model(&self) -> Result<PauliModel, CliError> {
        if self.model.is_empty() {
            return Ok(PauliModel::default());
        }
        self.model.parse().map_err(|e| CliError::field("noise.model", e))
    }

    /// Circuit noise for one swept value.
    pub fn at(&self, p: f64) -> Result<NoiseConfig, CliError> {
        let gate = GateNoise::new(self.pauli_model()?, p).map_err(|e| CliError::field("noise.p", e))?;
        let noise = match self.kind {
            NoiseKind::None => NoiseConfig::noiseless(),
            NoiseKind::Transducer => NoiseConfig::transducer(p),
            NoiseKind::Compression => NoiseConfig {
                compression: gate,
                ..NoiseConfig::default()
            },
            NoiseKind::Decoding => NoiseConfig {
                decoding: gate,
                ..NoiseConfig::default()
            },
            NoiseKind::Gates => NoiseConfig {
                transducer: 0.0,
                compression: gate,
                decoding: gate,
            },
        };
        noise.validate().map_err(|e| CliError::field("noise.p", e))?;
        Ok(noise)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiphotonSpec {
    #[serde(default)]
    pub policy: MultiphotonPolicy,
    /// 1, or 2 for the two-photon POVM (noiseless only).
    #[serde(default = "one")]
    pub max_photons: usize,
}

fn one() -> usize {
    1
}

impl Default for MultiphotonSpec {
    fn default() -> Self {
        Self {
            policy: MultiphotonPolicy::UniformGuess,
            max_photons: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub ba_tol: f64,
    pub ba_max_iter: usize,
    pub eigen_tol: f64,
    pub log_alpha_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let ba = BaOptions::default();
        Self {
            ba_tol: ba.tol,
            ba_max_iter: ba.max_iter,
            eigen_tol: DEFAULT_EIGEN_TOL,
            log_alpha_tol: AlphaSearch::default().log_alpha_tol,
        }
    }
}

impl Tolerances {
    pub fn ba(&self) -> BaOptions {
        BaOptions {
            tol: self.ba_tol,
            max_iter: self.ba_max_iter,
            accelerate: true,
        }
    }

    pub fn alpha_search(&self) -> AlphaSearch {
        AlphaSearch {
            log_alpha_tol: self.log_alpha_tol,
            ba: self.ba(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub code: CodeSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// One row per noise value at the PIE-maximizing grid amplitude instead
    /// of one row per grid point.
    #[serde(default)]
    pub optimize_alpha: bool,
    #[serde(default)]
    pub multiphoton: MultiphotonSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Reserved; every computation is deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every field and names the first bad one.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.trim().is_empty() {
            return Err(CliError::field("name", "must not be empty"));
        }
        let code = self.code.build()?;
        self.grid.alphas()?;
        self.noise.pauli_model()?;
        if self.noise.p.is_empty() {
            return Err(CliError::field("noise.p", "must not be empty"));
        }
        for &p in &self.noise.p {
            self.noise.at(p)?;
        }
        if self.noise.kind == NoiseKind::None && self.noise.p.iter().any(|&p| p != 0.0) {
            return Err(CliError::field("noise.p", "kind none takes only p = 0"));
        }
        if self.noise.kind != NoiseKind::None && !matches!(code.n_bins(), 4 | 8) {
            return Err(CliError::field(
                "noise.kind",
                format!("the circuit receiver needs N = 4 or 8, got {}", code.n_bins()),
            ));
        }
        let truncation = Truncation::from_max_photons(self.multiphoton.max_photons)
            .map_err(|e| CliError::field("multiphoton.max_photons", e))?;
        if truncation == Truncation::TwoPhoton && self.noise.kind != NoiseKind::None {
            return Err(CliError::field(
                "multiphoton.max_photons",
                "the two-photon receiver has no circuit; use noise.kind none",
            ));
        }
        if self.noise.kind != NoiseKind::None && self.multiphoton.policy != MultiphotonPolicy::UniformGuess {
            return Err(CliError::field(
                "multiphoton.policy",
                "the circuit receiver always guesses uniformly on lost mass",
            ));
        }
        let t = &self.tolerances;
        if !(t.ba_tol > 0.0) {
            return Err(CliError::field("tolerances.ba_tol", "must be positive"));
        }
        if t.ba_max_iter == 0 {
            return Err(CliError::field("tolerances.ba_max_iter", "must be positive"));
        }
        if !(t.eigen_tol > 0.0) {
            return Err(CliError::field("tolerances.eigen_tol", "must be positive"));
        }
        if !(t.log_alpha_tol > 0.0) {
            return Err(CliError::field("tolerances.log_alpha_tol", "must be positive"));
        }
        Ok(())
    }

    pub fn truncation(&self) -> Truncation {
        Truncation::from_max_photons(self.multiphoton.max_photons).unwrap_or(Truncation::OnePhoton)
    }
}
