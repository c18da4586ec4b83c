//! Scenario configuration: JSON schema, validation with field paths, and
//! resolution into library objects.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use congested_flow::fields::DeltaPadding;
use congested_flow::initdata::{DensityPiece, MacroscopicDatum, VelocityPiece};
use congested_flow::scenarios::{named_scenario, Scenario};

/// Invalid configuration, located by a JSON path such as
/// `datum.density[0].rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub left: f64,
    pub right: f64,
    pub rho: f64,
}

/// Affine velocity on `[left, right]`: either `u` (constant) or both
/// `u_left` and `u_right`.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VelocitySpec {
    pub left: f64,
    pub right: f64,
    #[serde(default)]
    pub u: Option<f64>,
    #[serde(default)]
    pub u_left: Option<f64>,
    #[serde(default)]
    pub u_right: Option<f64>,
}

/// Either a named scenario (with an optional parameter) or explicit pieces.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatumSpec {
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub parameter: Option<f64>,
    #[serde(default)]
    pub density: Option<Vec<DensitySpec>>,
    #[serde(default)]
    pub velocity: Option<Vec<VelocitySpec>>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_semigroup_pairs")]
    pub semigroup_pairs: usize,
    #[serde(default = "default_weak_tol")]
    pub weak_tol: f64,
}

fn default_true() -> bool {
    true
}

fn default_semigroup_pairs() -> usize {
    20
}

fn default_weak_tol() -> f64 {
    1e-8
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            enabled: true,
            semigroup_pairs: default_semigroup_pairs(),
            weak_tol: default_weak_tol(),
        }
    }
}

/// The configuration file as written.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub datum: DatumSpec,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub n_list: Option<Vec<usize>>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub sample_times: Option<Vec<f64>>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub seed: u64,
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub label: String,
    pub datum: MacroscopicDatum,
    /// Present for named scenarios; carries the expected-values manifest.
    pub scenario: Option<Scenario>,
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub horizon: f64,
    pub padding: DeltaPadding,
    pub sample_times: Vec<f64>,
    pub output: Option<PathBuf>,
    pub verify: VerifySpec,
    pub seed: u64,
}

/// Number of uniform sample times when none are given.
pub const DEFAULT_SAMPLES: usize = 11;

pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        ConfigError::new(path, e.into_inner().to_string())
    })
}

pub fn load(path: &Path) -> Result<Resolved, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    resolve(parse(&text)?)
}

fn resolve_datum(spec: &DatumSpec) -> Result<(String, MacroscopicDatum, Option<Scenario>), ConfigError> {
    match (&spec.scenario, &spec.density, &spec.velocity) {
        (Some(name), None, None) => {
            let s = named_scenario(name, spec.parameter).map_err(|e| {
                let field = if spec.parameter.is_some() && congested_flow::scenarios::SCENARIO_NAMES.contains(&name.as_str()) {
                    "datum.parameter"
                } else {
                    "datum.scenario"
                };
                ConfigError::new(field, e.to_string())
            })?;
            Ok((s.name.to_string(), s.datum.clone(), Some(s)))
        }
        (None, Some(density), Some(velocity)) => {
            if spec.parameter.is_some() {
                return Err(ConfigError::new("datum.parameter", "only named scenarios take a parameter"));
            }
            let mut dp = Vec::with_capacity(density.len());
            for (i, d) in density.iter().enumerate() {
                let at = |f: &str| format!("datum.density[{i}]{f}");
                if !(d.left.is_finite() && d.right.is_finite() && d.left < d.right) {
                    return Err(ConfigError::new(at(""), format!("need left < right, got [{}, {}]", d.left, d.right)));
                }
                if !d.rho.is_finite() || d.rho < 0.0 {
                    return Err(ConfigError::new(at(".rho"), format!("density must be nonnegative, got {}", d.rho)));
                }
                if d.rho > 1.0 {
                    return Err(ConfigError::new(at(".rho"), format!("density {} exceeds the maximal density 1", d.rho)));
                }
                dp.push(DensityPiece::new(d.left, d.right, d.rho));
            }
            let mut vp = Vec::with_capacity(velocity.len());
            for (i, v) in velocity.iter().enumerate() {
                let at = |f: &str| format!("datum.velocity[{i}]{f}");
                if !(v.left.is_finite() && v.right.is_finite() && v.left < v.right) {
                    return Err(ConfigError::new(at(""), format!("need left < right, got [{}, {}]", v.left, v.right)));
                }
                let (a, b) = match (v.u, v.u_left, v.u_right) {
                    (Some(u), None, None) => (u, u),
                    (None, Some(a), Some(b)) => (a, b),
                    _ => return Err(ConfigError::new(at(""), "give either u or both u_left and u_right")),
                };
                if !(a.is_finite() && b.is_finite()) {
                    return Err(ConfigError::new(at(""), "velocities must be finite"));
                }
                vp.push(VelocityPiece::new(v.left, v.right, a, b));
            }
            let datum = MacroscopicDatum::new(&dp, &vp).map_err(|e| {
                let field = match e {
                    congested_flow::Error::Admissibility(_) => "datum.velocity",
                    _ if e.to_string().contains("velocity") => "datum.velocity",
                    _ => "datum.density",
                };
                ConfigError::new(field, e.to_string())
            })?;
            Ok(("custom".to_string(), datum, None))
        }
        _ => Err(ConfigError::new(
            "datum",
            "give either `scenario` or both `density` and `velocity`",
        )),
    }
}

pub fn resolve(cfg: ScenarioConfig) -> Result<Resolved, ConfigError> {
    let (label, datum, scenario) = resolve_datum(&cfg.datum)?;
    let horizon = match (cfg.horizon, &scenario) {
        (Some(h), _) => h,
        (None, Some(s)) => s.horizon,
        (None, None) => return Err(ConfigError::new("horizon", "required for explicit data")),
    };
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ConfigError::new("horizon", format!("must be positive and finite, got {horizon}")));
    }
    if let Some(n) = cfg.n {
        if n < 2 {
            return Err(ConfigError::new("n", format!("need at least 2 particles, got {n}")));
        }
    }
    if let Some(list) = &cfg.n_list {
        if list.is_empty() {
            return Err(ConfigError::new("n_list", "must not be empty"));
        }
        if let Some(i) = list.iter().position(|&n| n < 2) {
            return Err(ConfigError::new(format!("n_list[{i}]"), format!("need at least 2 particles, got {}", list[i])));
        }
    }
    let padding = DeltaPadding::new(cfg.delta.unwrap_or(DeltaPadding::DEFAULT))
        .map_err(|e| ConfigError::new("delta", e.to_string()))?;
    let sample_times = match cfg.sample_times {
        Some(ts) => {
            if ts.is_empty() {
                return Err(ConfigError::new("sample_times", "must not be empty"));
            }
            if let Some(i) = ts.iter().position(|t| !(*t >= 0.0 && *t <= horizon)) {
                return Err(ConfigError::new(format!("sample_times[{i}]"), format!("{} is outside [0, {horizon}]", ts[i])));
            }
            if ts.windows(2).any(|w| w[1] < w[0]) {
                return Err(ConfigError::new("sample_times", "must be nondecreasing"));
            }
            ts
        }
        None => (0..DEFAULT_SAMPLES).map(|k| horizon * k as f64 / (DEFAULT_SAMPLES - 1) as f64).collect(),
    };
    if !(cfg.verify.weak_tol > 0.0) {
        return Err(ConfigError::new("verify.weak_tol", "must be positive"));
    }
    Ok(Resolved {
        label,
        datum,
        scenario,
        n: cfg.n,
        n_list: cfg.n_list,
        horizon,
        padding,
        sample_times,
        output: cfg.output,
        verify: cfg.verify,
        seed: cfg.seed,
    })
}

impl Resolved {
    pub fn require_n(&self, command: &str) -> Result<usize, ConfigError> {
        self.n
            .or_else(|| self.n_list.as_ref().and_then(|l| l.iter().copied().max()))
            .ok_or_else(|| ConfigError::new("n", format!("required by {command}")))
    }

    pub fn require_n_list(&self, command: &str) -> Result<Vec<usize>, ConfigError> {
        self.n_list
            .clone()
            .or_else(|| self.n.map(|n| vec![n]))
            .ok_or_else(|| ConfigError::new("n_list", format!("required by {command}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> ConfigError {
        parse(text).and_then(resolve).unwrap_err()
    }

    #[test]
    fn named_scenario_defaults() {
        let r = resolve(parse(r#"{"datum": {"scenario": "two-block"}, "n": 64}"#).unwrap()).unwrap();
        assert_eq!(r.label, "two-block");
        assert_eq!(r.horizon, 0.75);
        assert_eq!(r.sample_times.len(), DEFAULT_SAMPLES);
        assert_eq!(r.padding.delta(), 0.1);
        assert!(r.verify.enabled);
    }

    #[test]
    fn explicit_datum() {
        let text = r#"{
            "datum": {
                "density": [{"left": 0, "right": 2, "rho": 0.5}],
                "velocity": [{"left": 0, "right": 2, "u_left": 1, "u_right": -1}]
            },
            "n": 16, "horizon": 1.0, "sample_times": [0, 0.5, 1]
        }"#;
        let r = resolve(parse(text).unwrap()).unwrap();
        assert_eq!(r.label, "custom");
        assert_eq!(r.datum.support(), (0.0, 2.0));
    }

    #[test]
    fn errors_carry_field_paths() {
        let dens = |rho: &str| {
            format!(
                r#"{{"datum": {{"density": [{{"left": 0, "right": 1, "rho": {rho}}}],
                "velocity": [{{"left": 0, "right": 1, "u": 0}}]}}, "n": 4, "horizon": 1}}"#
            )
        };
        let e = err(&dens("1.2"));
        assert_eq!(e.path, "datum.density[0].rho");
        assert!(e.message.contains("exceeds"));
        assert_eq!(err(&dens("0.5")).path, "datum.density");

        assert_eq!(err(r#"{"datum": {"scenario": "two-block"}, "n": 4, "bogus": 1}"#).path, "bogus");
        assert!(err(r#"{"datum": {"scenario": "two-block"}, "n": 4, "bogus": 1}"#).message.contains("bogus"));
        assert_eq!(err(r#"{"datum": {"scenario": "two-block", "extra": 1}}"#).path, "datum.extra");
        assert_eq!(err(r#"{"datum": {"scenario": "two-block"}, "n": "x"}"#).path, "n");
        assert_eq!(err(r#"{"datum": {"scenario": "nope"}}"#).path, "datum.scenario");
        assert_eq!(err(r#"{"datum": {"scenario": "two-block", "parameter": 1.5}}"#).path, "datum.parameter");
        assert_eq!(err(r#"{"datum": {}}"#).path, "datum");
        assert_eq!(err(r#"{"datum": {"scenario": "two-block"}, "n": 1}"#).path, "n");
        assert_eq!(err(r#"{"datum": {"scenario": "two-block"}, "n_list": [8, 1]}"#).path, "n_list[1]");
        assert_eq!(err(r#"{"datum": {"scenario": "two-block"}, "delta": 0}"#).path, "delta");
        assert_eq!(err(r#"{"datum": {"scenario": "two-block"}, "sample_times": [0, 9]}"#).path, "sample_times[1]");
        assert_eq!(err(r#"{"datum": {"scenario": "two-block"}, "verify": {"weak_tol": -1}}"#).path, "verify.weak_tol");
        assert_eq!(
            err(r#"{"datum": {"density": [{"left": 0, "right": 1, "rho": 1}],
                "velocity": [{"left": 0, "right": 1, "u": 0}]}}"#)
            .path,
            "horizon"
        );
        // Shear inside a saturated region.
        let e = err(r#"{"datum": {"density": [{"left": 0, "right": 1, "rho": 1}],
            "velocity": [{"left": 0, "right": 1, "u_left": 1, "u_right": 0}]}, "horizon": 1}"#);
        assert_eq!(e.path, "datum.velocity");
        let e = err(r#"{"datum": {"density": [{"left": 0, "right": 1, "rho": 1}],
            "velocity": [{"left": 0, "right": 1, "u": 1, "u_left": 0}]}, "horizon": 1}"#);
        assert_eq!(e.path, "datum.velocity[0]");
    }

    #[test]
    fn command_requirements() {
        let r = resolve(parse(r#"{"datum": {"scenario": "two-block"}}"#).unwrap()).unwrap();
        assert_eq!(r.require_n("simulate").unwrap_err().path, "n");
        let r = resolve(parse(r#"{"datum": {"scenario": "two-block"}, "n_list": [8, 32]}"#).unwrap()).unwrap();
        assert_eq!(r.require_n("simulate").unwrap(), 32);
        assert_eq!(r.require_n_list("converge").unwrap(), vec![8, 32]);
    }
}
