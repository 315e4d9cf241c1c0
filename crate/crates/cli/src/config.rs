//! Run configuration: one JSON document, unknown keys rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nspike_core::kernel::KernelDescriptor;
use nspike_core::nonlinearity::Monomial;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    Sweep,
    Periodic,
    HypothesesOnly,
    Tail,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "solve" => Ok(Self::Solve),
            "sweep" => Ok(Self::Sweep),
            "periodic" => Ok(Self::Periodic),
            "hypotheses-only" => Ok(Self::HypothesesOnly),
            "tail" => Ok(Self::Tail),
            other => Err(format!(
                "unknown mode '{other}' (expected solve, sweep, periodic, hypotheses-only, tail)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingChoice {
    Quadratic,
    Cubic,
}

/// Named group or explicit generator matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SymmetryConfig {
    Named(String),
    Generators(Vec<Vec<Vec<i32>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub components: usize,
    pub terms: Vec<Monomial>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub tol_inner: Option<f64>,
    pub tol_outer: Option<f64>,
    pub inner_radius: Option<f64>,
    pub outer_radius: Option<f64>,
    pub max_inner: Option<usize>,
    pub max_outer: Option<usize>,
    pub gmres_tol: Option<f64>,
    pub symmetry_drift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub dimension: Option<usize>,
    /// Square table of kernel entries, row-major.
    #[serde(default)]
    pub kernel: Option<Vec<Vec<KernelDescriptor>>>,
    #[serde(default)]
    pub nonlinearity: Option<NonlinearityConfig>,
    #[serde(default)]
    pub symmetry: Option<SymmetryConfig>,
    #[serde(default)]
    pub scaling: Option<ScalingChoice>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default = "default_ell")]
    pub ell: u32,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub mu_list: Option<Vec<f64>>,
    #[serde(default)]
    pub l0_list: Option<Vec<f64>>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub full_newton: bool,
    /// Run the ground-state nondegeneracy check before solving.
    #[serde(default = "default_true")]
    pub nondegeneracy: bool,
}

fn default_true() -> bool {
    true
}

fn default_ell() -> u32 {
    2
}

fn default_mode() -> Mode {
    Mode::Solve
}

fn default_seed() -> u64 {
    7
}

/// A configuration problem tied to a field name.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.starts_with("line ") {
            write!(f, "config {}: {}", self.field, self.message)
        } else {
            write!(f, "config field '{}': {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| {
            ConfigError::new(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// `μ` for single-solve modes: explicit value, else the first list entry.
    pub fn single_mu(&self) -> Result<f64, ConfigError> {
        let mu = self
            .mu
            .or_else(|| self.mu_list.as_ref().and_then(|l| l.first().copied()))
            .ok_or_else(|| ConfigError::new("mu", "this mode needs 'mu' or a non-empty 'mu_list'"))?;
        positive("mu", mu)
    }

    pub fn sweep_mus(&self) -> Result<Vec<f64>, ConfigError> {
        let list = match (&self.mu_list, self.mu) {
            (Some(l), _) if !l.is_empty() => l.clone(),
            (_, Some(mu)) => vec![mu],
            _ => return Err(ConfigError::new("mu_list", "sweep mode needs a non-empty 'mu_list'")),
        };
        for &mu in &list {
            positive("mu_list", mu)?;
        }
        Ok(list)
    }

    pub fn l0s(&self) -> Result<Vec<f64>, ConfigError> {
        let list = self
            .l0_list
            .clone()
            .filter(|l| !l.is_empty())
            .ok_or_else(|| ConfigError::new("l0_list", "periodic mode needs a non-empty 'l0_list'"))?;
        for &l in &list {
            positive("l0_list", l)?;
        }
        Ok(list)
    }
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(field, format!("expected a positive number, got {v}")))
    }
}
