//! Declarative scenario files.
//!
//! Physical values are in units of ω_c, observation times in units of 1/γ.
//!
//! ```toml
//! observables = ["gap", "steady", "metastable", "transient"]
//! tau_list = [10.0, 100.0, 1000.0]
//! initial_state = "ground"            # "first_excited" | { populations = [...] }
//! drive_rule = "resonant_second_transition"   # | { fixed = 1.0 }
//!
//! [base]
//! g = 0.0
//! drive = 1e-3
//! gamma = 1e-2
//! kappa = 1e-2
//!
//! [sweep]
//! axis = "g"
//! start = 0.1
//! stop = 3.0
//! points = 60                        # or: values = [0.5, 1.0]
//!
//! [output]
//! dir = "out"
//! format = "csv"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::SystemParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// The message carries the line, column and offending key.
    #[error("{0}")]
    Parse(String),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, reason: reason.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    G,
    OmegaA,
    OmegaC,
    Drive,
    OmegaD,
    Gamma,
    Kappa,
    GammaPhi,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::G => "g",
            Axis::OmegaA => "omega_a",
            Axis::OmegaC => "omega_c",
            Axis::Drive => "drive",
            Axis::OmegaD => "omega_d",
            Axis::Gamma => "gamma",
            Axis::Kappa => "kappa",
            Axis::GammaPhi => "gamma_phi",
        }
    }

    pub fn apply(self, base: &SystemParams, value: f64) -> SystemParams {
        let mut p = base.clone();
        *match self {
            Axis::G => &mut p.g,
            Axis::OmegaA => &mut p.omega_a,
            Axis::OmegaC => &mut p.omega_c,
            Axis::Drive => &mut p.drive,
            Axis::OmegaD => &mut p.omega_d,
            Axis::Gamma => &mut p.gamma,
            Axis::Kappa => &mut p.kappa,
            Axis::GammaPhi => &mut p.gamma_phi,
        } = value;
        p
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub axis: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

impl SweepAxis {
    pub fn single(axis: Axis, value: f64) -> Self {
        Self { axis, values: Some(vec![value]), start: None, stop: None, points: None }
    }

    /// Grid values in ascending order.
    pub fn grid(&self) -> Result<Vec<f64>, ConfigError> {
        let mut v = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
            },
            _ => return Err(invalid("sweep", "give either `values` or all of `start`, `stop`, `points`")),
        };
        if v.is_empty() {
            return Err(invalid("sweep", "grid is empty"));
        }
        if let Some(x) = v.iter().find(|x| !x.is_finite()) {
            return Err(invalid("sweep", format!("grid value {x} is not finite")));
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveRule {
    /// Tune ω_d to the |Ψ₀⁺⟩ → |Ψ₁⁻⟩ transition at every grid point.
    ResonantSecondTransition,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// First three labelled nonzero rates.
    Gap,
    /// Steady-state I_out and g²(0).
    Steady,
    /// c_min, c_max and the extremal-state observables.
    Metastable,
    /// Period-averaged I_out and g²(0) at every τ in `tau_list`.
    Transient,
    /// Random initial states checked against the extremal intensities.
    Bracket,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Ground,
    FirstExcited,
    /// Diagonal populations in the energy-ordered dressed basis, renormalized.
    Populations(Vec<f64>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), format: Format::Csv }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// Left/right residual at which harmonic escalation may stop.
    pub biorthonormality_tol: f64,
    pub max_k_max: usize,
    /// Write-once eigensystem cache, keyed by a hash of the resolved parameters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Relative I_out offset regarded as converged by `fit-decay`.
    pub fit_converged: f64,
    /// Number of random initial states for the bracket check.
    pub random_states: usize,
    /// τγ at which random initial states are compared to the extremal states.
    pub bracket_tau: f64,
    /// Relative slack of the bracket check.
    pub bracket_slack: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            biorthonormality_tol: crate::floquet::BIORTHONORMALITY_TOL,
            max_k_max: 32,
            cache_dir: None,
            fit_converged: 1e-2,
            random_states: 100,
            bracket_tau: 100.0,
            bracket_slack: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_observables")]
    pub observables: Vec<Observable>,
    #[serde(default)]
    pub tau_list: Vec<f64>,
    #[serde(default = "default_initial")]
    pub initial_state: InitialState,
    #[serde(default = "default_rule")]
    pub drive_rule: DriveRule,
    #[serde(default)]
    pub base: SystemParams,
    pub sweep: SweepAxis,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
}

fn default_observables() -> Vec<Observable> {
    vec![Observable::Gap, Observable::Steady]
}

fn default_initial() -> InitialState {
    InitialState::Ground
}

fn default_rule() -> DriveRule {
    DriveRule::ResonantSecondTransition
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    // negated comparisons reject NaN along with out-of-range values
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sweep.grid()?;
        if let Some(t) = self.tau_list.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(invalid("tau_list", format!("{t} is not a positive time")));
        }
        if self.observables.contains(&Observable::Transient) && self.tau_list.is_empty() {
            return Err(invalid("tau_list", "transient observables need at least one time"));
        }
        match &self.drive_rule {
            DriveRule::Fixed(w) if !(w.is_finite() && *w > 0.0) => {
                return Err(invalid("drive_rule", format!("fixed frequency {w} must be positive")))
            }
            DriveRule::ResonantSecondTransition if self.sweep.axis == Axis::OmegaD => {
                return Err(invalid("sweep", "cannot sweep omega_d while the drive rule sets it"))
            }
            _ => {}
        }
        if let InitialState::Populations(p) = &self.initial_state {
            if p.is_empty() || p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || p.iter().sum::<f64>() <= 0.0 {
                return Err(invalid("initial_state", "populations must be non-negative with a positive sum"));
            }
            if p.len() > self.base.n_dressed {
                return Err(invalid("initial_state", format!("{} populations for {} dressed levels", p.len(), self.base.n_dressed)));
            }
        }
        let n = &self.numerics;
        if !(n.biorthonormality_tol > 0.0) {
            return Err(invalid("numerics.biorthonormality_tol", "must be positive"));
        }
        if !(n.fit_converged > 0.0 && n.fit_converged < 1.0) {
            return Err(invalid("numerics.fit_converged", "must lie in (0, 1)"));
        }
        if !(n.bracket_tau > 0.0) {
            return Err(invalid("numerics.bracket_tau", "must be positive"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization; whitespace and comments in the
    /// source file do not change it.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn wants(&self, o: Observable) -> bool {
        self.observables.contains(&o)
    }
}
