//! Scenario files: parsing, validation and resolution of generators.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use swk_core::analysis::RefineOptions;
use swk_core::kernel::KernelError;
use swk_core::{IntegratorConfig, KernelKind, ModelParams, NaturalFrequencies, PhaseState, Regime, Slack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Adaptive,
    Regular,
    Scaled,
    Singular,
}

impl Model {
    /// Kernel of the phase model; `None` for the adaptive-coupling system.
    pub fn kind(self) -> Option<KernelKind> {
        match self {
            Model::Adaptive => None,
            Model::Regular => Some(KernelKind::RegularH),
            Model::Scaled => Some(KernelKind::ScaledHEps),
            Model::Singular => Some(KernelKind::SingularH),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    List(Vec<f64>),
    Generator(OmegaGenerator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaGenerator {
    pub seed: u64,
    pub distribution: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    UniformZeroMean { width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    List(Vec<f64>),
    Generator(ThetaGenerator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaGenerator {
    pub seed: u64,
    pub confined_diameter: f64,
}

/// Check identifiers. Trajectory bounds are evaluated by `simulate` and
/// `bounds`; the others by the sweep commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    TwoOscillator,
    Identical,
    Nonidentical,
    Regular,
    Convergence,
    FrequencyBound,
    EnergyBound,
    Membership,
}

impl Check {
    pub fn is_trajectory_bound(self) -> bool {
        matches!(self, Check::TwoOscillator | Check::Identical | Check::Nonidentical | Check::Regular)
    }

    pub fn name(self) -> &'static str {
        match self {
            Check::TwoOscillator => "two_oscillator",
            Check::Identical => "identical",
            Check::Nonidentical => "nonidentical",
            Check::Regular => "regular",
            Check::Convergence => "convergence",
            Check::FrequencyBound => "frequency_bound",
            Check::EnergyBound => "energy_bound",
            Check::Membership => "membership",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    /// Directory for output files; `--out` takes precedence.
    pub dir: Option<String>,
    /// Prepended to every output file name.
    pub prefix: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundOptions {
    pub slack: Slack,
    /// Relative slack on the two-oscillator collision-time bracket.
    pub time_slack: f64,
    /// Parameter of the supercritical first-collision time.
    pub beta: f64,
    /// Target diameter for the non-identical and regular bounds.
    pub d_inf: Option<f64>,
    /// Largest accepted membership residual of the sweep reference run.
    pub membership_tol: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { slack: Slack::default(), time_slack: 1e-4, beta: 0.5, d_inf: None, membership_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub eps: Vec<f64>,
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: Model,
    pub params: ModelParams,
    pub omega: OmegaSpec,
    pub theta0: ThetaSpec,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub bounds: BoundOptions,
    #[serde(default)]
    pub sweep: SweepOptions,
    /// Equilibrium refinement of the `stability` command.
    #[serde(default)]
    pub stability: RefineOptions,
}

/// A configuration problem, located by field path and, for syntax errors,
/// by line and column.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<(usize, usize)>,
    pub message: String,
}

impl ConfigError {
    pub fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() || self.path == "." { "<root>" } else { &self.path };
        match self.line {
            Some((l, c)) => write!(f, "{path} (line {l}, column {c}): {}", self.message),
            None => write!(f, "{path}: {}", self.message),
        }
    }
}

/// Deserializes JSON, reporting the failing field path and position.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError { path, line: Some((inner.line(), inner.column())), message: inner.to_string() }
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::at("", format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text)
}

pub fn param_error(e: KernelError) -> ConfigError {
    match e {
        KernelError::InvalidParam { name, value, reason } => {
            ConfigError::at(format!("params.{name}"), format!("{value} {reason}"))
        }
        KernelError::WrongKernel { requirement, .. } => {
            ConfigError::at("params.epsilon", format!("model requires {requirement}"))
        }
        e => ConfigError::at("params", e.to_string()),
    }
}

/// A validated scenario with generators evaluated.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub scenario: ScenarioConfig,
    pub params: ModelParams,
    pub omega: NaturalFrequencies,
    pub theta0: PhaseState,
}

impl ScenarioConfig {
    /// Replaces the seed of every generator.
    pub fn override_seed(&mut self, seed: u64) {
        if let OmegaSpec::Generator(g) = &mut self.omega {
            g.seed = seed;
        }
        if let ThetaSpec::Generator(g) = &mut self.theta0 {
            g.seed = seed;
        }
    }

    pub fn resolve(self) -> Result<Resolved, ConfigError> {
        let params = self.params.clone().resolved();
        params.validate().map_err(param_error)?;
        if let Some(kind) = self.model.kind() {
            kind.check(&params).map_err(param_error)?;
        }
        let n = params.n_osc;
        let omega = match &self.omega {
            OmegaSpec::List(v) => {
                finite_list("omega", v, n)?;
                NaturalFrequencies::new(v.clone())
            }
            OmegaSpec::Generator(g) => {
                let Distribution::UniformZeroMean { width } = g.distribution;
                if !(width >= 0.0 && width.is_finite()) {
                    return Err(ConfigError::at("omega.distribution.uniform_zero_mean.width", "must be finite and ≥ 0"));
                }
                NaturalFrequencies::uniform_zero_mean(n, width, g.seed)
            }
        };
        let theta0 = match &self.theta0 {
            ThetaSpec::List(v) => {
                finite_list("theta0", v, n)?;
                PhaseState::new(0.0, v.clone())
            }
            ThetaSpec::Generator(g) => {
                if !(g.confined_diameter >= 0.0 && g.confined_diameter.is_finite()) {
                    return Err(ConfigError::at("theta0.confined_diameter", "must be finite and ≥ 0"));
                }
                PhaseState::confined(n, g.confined_diameter, g.seed)
            }
        };
        self.integrator.validate().map_err(|e| ConfigError::at("integrator", e.to_string()))?;
        let b = &self.bounds;
        if !(b.time_slack >= 0.0 && b.slack.rel >= 0.0 && b.slack.abs >= 0.0 && b.membership_tol >= 0.0) {
            return Err(ConfigError::at("bounds", "slacks and tolerances must be non-negative"));
        }
        if let Some(d) = b.d_inf {
            if !(d > 0.0 && d < std::f64::consts::PI) {
                return Err(ConfigError::at("bounds.d_inf", "must lie in (0,π)"));
            }
        }
        for (i, c) in self.checks.iter().enumerate() {
            let at = format!("checks[{i}]");
            match c {
                Check::TwoOscillator | Check::Identical | Check::Nonidentical if self.model != Model::Singular => {
                    return Err(ConfigError::at(at, format!("{} needs the singular model", c.name())));
                }
                Check::Nonidentical if params.regime() != Regime::Subcritical => {
                    return Err(ConfigError::at(at, "nonidentical needs alpha < 1/2"));
                }
                Check::Nonidentical if b.d_inf.is_none() => {
                    return Err(ConfigError::at("bounds.d_inf", "required by the nonidentical check"));
                }
                Check::TwoOscillator if n != 2 => {
                    return Err(ConfigError::at(at, "two_oscillator needs n_osc = 2"));
                }
                Check::Regular if self.model != Model::Regular => {
                    return Err(ConfigError::at(at, "regular needs the regular model"));
                }
                _ => {}
            }
        }
        Ok(Resolved { scenario: self, params, omega, theta0 })
    }
}

fn finite_list(field: &str, v: &[f64], n: usize) -> Result<(), ConfigError> {
    if v.len() != n {
        return Err(ConfigError::at(field, format!("expected {n} entries (params.n_osc), got {}", v.len())));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(ConfigError::at(format!("{field}[{i}]"), "must be finite"));
    }
    Ok(())
}

/// Comma-separated list of numbers, as given to `--eps` and `--eta`.
pub fn parse_list(flag: &str, s: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| ConfigError::at(flag, format!("bad number {x:?}: {e}"))))
        .collect()
}
