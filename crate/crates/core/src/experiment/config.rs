use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{DomainConfig, ProfileSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Regdist,
    Mollify,
    Extend,
    Solve,
    Probe,
    Counterexample,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Regdist => "regdist",
            Self::Mollify => "mollify",
            Self::Extend => "extend",
            Self::Solve => "solve",
            Self::Probe => "probe",
            Self::Counterexample => "counterexample",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleKind {
    Cusp,
    Wedge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ToleranceProfile {
    Strict,
    #[default]
    Default,
}

/// Thresholds shared by all cells. Unset fields take the profile's value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub young_slack: Option<f64>,
    pub trace_tolerance: Option<f64>,
    pub picard_tol: Option<f64>,
    pub contraction_slack: Option<f64>,
}

/// Tolerances with every field resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedTolerances {
    pub young_slack: f64,
    pub trace_tolerance: f64,
    pub picard_tol: f64,
    pub contraction_slack: f64,
}

impl Tolerances {
    pub fn resolve(&self, profile: ToleranceProfile) -> ResolvedTolerances {
        let base = match profile {
            ToleranceProfile::Default => ResolvedTolerances {
                young_slack: 1e-6,
                trace_tolerance: 1e-2,
                picard_tol: 1e-8,
                contraction_slack: 1e-6,
            },
            ToleranceProfile::Strict => ResolvedTolerances {
                young_slack: 0.0,
                trace_tolerance: 1e-3,
                picard_tol: 1e-10,
                contraction_slack: 0.0,
            },
        };
        ResolvedTolerances {
            young_slack: self.young_slack.unwrap_or(base.young_slack),
            trace_tolerance: self.trace_tolerance.unwrap_or(base.trace_tolerance),
            picard_tol: self.picard_tol.unwrap_or(base.picard_tol),
            contraction_slack: self.contraction_slack.unwrap_or(base.contraction_slack),
        }
    }
}

/// Constant-coefficient operator `a_ij D_ij + drift_i D_i + a0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    #[serde(default = "identity")]
    pub a: [[f64; 2]; 2],
    #[serde(default)]
    pub drift: [f64; 2],
    #[serde(default)]
    pub a0: f64,
    #[serde(default = "one")]
    pub nu: f64,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        Self { a: identity(), drift: [0.0; 2], a0: 0.0, nu: 1.0 }
    }
}

/// Constant oblique field `b0 u + b·Du`; `b` is given by its angle from the outward normal
/// direction `(0, 1)` when `angle` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSpec {
    #[serde(default = "up")]
    pub b: [f64; 2],
    pub angle: Option<f64>,
    #[serde(default)]
    pub b0: f64,
}

impl Default for BcSpec {
    fn default() -> Self {
        Self { b: up(), angle: None, b0: 0.0 }
    }
}

impl BcSpec {
    pub fn vector(&self) -> [f64; 2] {
        match self.angle {
            Some(t) => [t.sin(), t.cos()],
            None => self.b,
        }
    }
}

/// Named data families for `solve` and `probe`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Manufactured {
    /// `u = sin x cosh y`
    #[default]
    Harmonic,
    /// `u = x² + y²`
    Quadratic,
}

/// Boundary datum for `extend`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatumSpec {
    Constant { value: f64 },
    Linear { slope: f64 },
    Sine { frequency: f64 },
    Samples { x: Vec<f64>, values: Vec<f64> },
}

impl Default for DatumSpec {
    fn default() -> Self {
        Self::Constant { value: 1.0 }
    }
}

/// One experiment: a kind, its inputs, sweep axes and output settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub operator: OperatorSpec,
    #[serde(default)]
    pub bc: BcSpec,
    #[serde(default)]
    pub datum: DatumSpec,
    #[serde(default)]
    pub data: Manufactured,
    pub example: Option<ExampleKind>,
    pub theta0: Option<f64>,
    pub eps: Option<f64>,
    pub beta: Option<f64>,
    /// Exponents; each value becomes one cell.
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    /// Localization radius `R` or probe radius `r`.
    pub radius: Option<f64>,
    /// Grid sizes; each value becomes one cell.
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Extra axes over named scalar parameters; the cells are the Cartesian product.
    #[serde(default)]
    pub sweep: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub tolerance_profile: ToleranceProfile,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
}

/// Parameters a sweep axis may name.
pub const SWEEP_AXES: &[&str] = &["eps0", "delta", "theta", "theta0", "eps", "beta", "radius", "angle", "b0"];

fn identity() -> [[f64; 2]; 2] {
    [[1.0, 0.0], [0.0, 1.0]]
}

fn one() -> f64 {
    1.0
}

fn up() -> [f64; 2] {
    [0.0, 1.0]
}

fn default_p() -> Vec<f64> {
    vec![2.0]
}

fn default_trials() -> usize {
    100
}

impl ExperimentConfig {
    /// A config of the given kind with every optional input at its default.
    pub fn minimal(kind: ExperimentKind) -> Self {
        Self {
            kind,
            domain: None,
            operator: OperatorSpec::default(),
            bc: BcSpec::default(),
            datum: DatumSpec::default(),
            data: Manufactured::default(),
            example: None,
            theta0: None,
            eps: None,
            beta: None,
            p: default_p(),
            radius: None,
            n: Vec::new(),
            trials: default_trials(),
            sweep: BTreeMap::new(),
            tolerances: Tolerances::default(),
            tolerance_profile: ToleranceProfile::Default,
            seed: 0,
            output: None,
        }
    }

    /// Parses and validates; errors carry the path of the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: match e.path().to_string() {
                p if p == "." => "<root>".into(),
                p => p,
            },
            message: e.inner().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| Err(Error::Config { path: path.into(), message });
        for axis in self.sweep.keys() {
            if !SWEEP_AXES.contains(&axis.as_str()) {
                return bad(&format!("sweep.{axis}"), format!("unknown parameter; expected one of {SWEEP_AXES:?}"));
            }
            if matches!(axis.as_str(), "eps0" | "delta") && self.domain.is_none() {
                return bad(&format!("sweep.{axis}"), "domain axes need a `domain` entry".into());
            }
        }
        if let Some(k) = self.p.iter().position(|&p| !(p > 1.0 && p.is_finite())) {
            return bad(&format!("p[{k}]"), format!("exponent {} must be finite and exceed 1", self.p[k]));
        }
        if let Some(k) = self.n.iter().position(|&n| n < 5) {
            return bad(&format!("n[{k}]"), "grid sizes need at least 5 nodes".into());
        }
        if let Some(r) = self.radius {
            if !(r > 0.0) {
                return bad("radius", format!("radius {r} must be positive"));
            }
        }
        match self.kind {
            ExperimentKind::Counterexample => match self.example {
                None => return bad("example", "counterexample runs need `example: cusp | wedge`".into()),
                Some(ExampleKind::Wedge) if self.theta0.is_none() && !self.sweep.contains_key("theta0") => {
                    return bad("theta0", "wedge runs need `theta0`".into())
                }
                _ => {}
            },
            _ if self.example.is_some() => return bad("example", "only counterexample runs take an example".into()),
            ExperimentKind::Regdist | ExperimentKind::Mollify | ExperimentKind::Extend if self.domain.is_none() => {
                return bad("domain", format!("{} runs need a domain", self.kind.name()))
            }
            _ => {}
        }
        if let Some(DomainConfig { profile: ProfileSpec::Table { points, csv }, .. }) = &self.domain {
            if points.is_empty() && csv.is_none() {
                return bad("domain.points", "table domains need `points` or `csv`".into());
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).unwrap_or_default();
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
