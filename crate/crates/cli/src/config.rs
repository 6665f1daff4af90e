// `!(x > 0)` guards intentionally reject NaN configuration values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Configuration ingestion: JSON config files, overrides, and validation.
//!
//! Validation collects every problem it finds rather than stopping at the
//! first, so a config with three mistakes reports three errors.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::scenario::registry_names;

/// Documented override ranges.
pub const N_RANGE: (usize, usize) = (8, 512);
pub const T_END_RANGE: (f64, f64) = (0.0, 1000.0);
pub const TOLERANCE_RANGE: (f64, f64) = (0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// An analytic field: `base + Σ amp·wave(2π·freq·axis)`, optionally
/// exponentiated. Evaluable at any resolution, which is what lets the
/// diagnostics derive a refinement-pair discretization slack.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct FieldSpec {
    #[serde(default)]
    pub base: f64,
    #[serde(default)]
    pub terms: Vec<WaveTerm>,
    #[serde(default)]
    pub exp: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveTerm {
    pub wave: Wave,
    pub axis: Axis,
    #[serde(default = "one")]
    pub freq: u32,
    pub amp: f64,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Wave {
    Sin,
    Cos,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl FieldSpec {
    pub fn constant(value: f64) -> Self {
        FieldSpec {
            base: value,
            terms: Vec::new(),
            exp: false,
        }
    }

    pub fn wave(wave: Wave, axis: Axis, freq: u32, amp: f64) -> Self {
        FieldSpec {
            base: 0.0,
            terms: vec![WaveTerm {
                wave,
                axis,
                freq,
                amp,
            }],
            exp: false,
        }
    }

    pub fn with_term(mut self, wave: Wave, axis: Axis, freq: u32, amp: f64) -> Self {
        self.terms.push(WaveTerm {
            wave,
            axis,
            freq,
            amp,
        });
        self
    }

    pub fn exponentiated(mut self) -> Self {
        self.exp = true;
        self
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut v = self.base;
        for t in &self.terms {
            let arg = 2.0
                * std::f64::consts::PI
                * t.freq as f64
                * match t.axis {
                    Axis::X => x,
                    Axis::Y => y,
                };
            v += t.amp
                * match t.wave {
                    Wave::Sin => arg.sin(),
                    Wave::Cos => arg.cos(),
                };
        }
        if self.exp {
            v.exp()
        } else {
            v
        }
    }
}

/// Reference-family description in config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FamilySpec {
    Static { omega_hat: FieldSpec },
    Linear {
        omega0: FieldSpec,
        eta: FieldSpec,
        t_prime: f64,
    },
    Exponential {
        omega0: FieldSpec,
        omega_inf: FieldSpec,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegeneracySpec {
    pub epsilon: f64,
    pub s_floor: f64,
    pub c_cap: f64,
}

/// A fully custom flow run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CustomRun {
    #[serde(rename = "N")]
    pub n: usize,
    pub nu: u8,
    pub family: FamilySpec,
    pub omega_density: FieldSpec,
    pub phi0: FieldSpec,
    #[serde(default)]
    pub degeneracy_profile: Option<FieldSpec>,
    pub t_end: f64,
    pub sample_every: f64,
    #[serde(default = "default_dt_cap_c")]
    pub dt_cap_c: f64,
    #[serde(default)]
    pub dt_max: Option<f64>,
    #[serde(default)]
    pub mabuchi: bool,
    #[serde(default)]
    pub degeneracy_check: Option<DegeneracySpec>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn default_dt_cap_c() -> f64 {
    0.2
}

/// Raw JSON shape of a config file.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct RawConfig {
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub custom: Option<CustomRun>,
    #[serde(default)]
    pub geometry: Option<String>,
    #[serde(default)]
    pub class: Option<Vec<String>>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub overrides: Option<RawOverrides>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct RawOverrides {
    #[serde(default, rename = "N")]
    pub n: Option<usize>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

/// Validated overrides.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub n: Option<usize>,
    pub t_end: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum Mode {
    Scenario { name: String },
    AllScenarios,
    Run { custom: Box<CustomRun> },
    Classify { geometry: PathBuf, class: Vec<String> },
    Mmp { geometry: PathBuf, class: Vec<String> },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub out: PathBuf,
    pub overrides: Overrides,
    pub jobs: usize,
}

/// Default output directory: `KRFLOW_OUT` if set, else the current directory.
pub fn default_out_dir() -> PathBuf {
    match std::env::var_os("KRFLOW_OUT") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from("."),
    }
}

pub fn validate_overrides(raw: &RawOverrides, errors: &mut Vec<ConfigError>) -> Overrides {
    let mut over = Overrides::default();
    if let Some(n) = raw.n {
        if n < N_RANGE.0 || n > N_RANGE.1 {
            errors.push(ConfigError(format!(
                "override N={} is out of range [{}, {}]",
                n, N_RANGE.0, N_RANGE.1
            )));
        } else {
            over.n = Some(n);
        }
    }
    if let Some(t) = raw.t_end {
        if !(t > T_END_RANGE.0 && t <= T_END_RANGE.1) {
            errors.push(ConfigError(format!(
                "override t_end={} is out of range ({}, {}]",
                t, T_END_RANGE.0, T_END_RANGE.1
            )));
        } else {
            over.t_end = Some(t);
        }
    }
    if let Some(tol) = raw.tolerance {
        if !(tol > TOLERANCE_RANGE.0 && tol <= TOLERANCE_RANGE.1) {
            errors.push(ConfigError(format!(
                "override tolerance={} is out of range ({}, {}]",
                tol, TOLERANCE_RANGE.0, TOLERANCE_RANGE.1
            )));
        } else {
            over.tolerance = Some(tol);
        }
    }
    over
}

fn validate_custom(c: &CustomRun, errors: &mut Vec<ConfigError>) {
    if c.n < N_RANGE.0 || c.n > N_RANGE.1 {
        errors.push(ConfigError(format!(
            "custom N={} is out of range [{}, {}]",
            c.n, N_RANGE.0, N_RANGE.1
        )));
    }
    if c.nu > 1 {
        errors.push(ConfigError(format!("nu must be 0 or 1, got {}", c.nu)));
    }
    if !(c.t_end > 0.0) {
        errors.push(ConfigError(format!("t_end must be positive, got {}", c.t_end)));
    }
    if !(c.sample_every > 0.0) {
        errors.push(ConfigError(format!(
            "sample_every must be positive, got {}",
            c.sample_every
        )));
    }
    if !(c.dt_cap_c > 0.0) {
        errors.push(ConfigError(format!(
            "dt_cap_c must be positive, got {}",
            c.dt_cap_c
        )));
    }
    if let FamilySpec::Linear { t_prime, .. } = &c.family {
        if !(*t_prime > 0.0) {
            errors.push(ConfigError(format!(
                "linear family t_prime must be positive, got {t_prime}"
            )));
        } else if c.t_end > *t_prime {
            errors.push(ConfigError(format!(
                "t_end={} exceeds the linear family range [0, {}]",
                c.t_end, t_prime
            )));
        }
    }
    if let Some(d) = &c.degeneracy_check {
        if !(d.epsilon > 0.0) || !(d.s_floor > 0.0) {
            errors.push(ConfigError(
                "degeneracy check needs positive epsilon and s_floor".into(),
            ));
        }
    }
}

fn validate_class_strings(class: &[String], errors: &mut Vec<ConfigError>) {
    for s in class {
        if krflow_core::rational::parse_rational(s).is_err() {
            errors.push(ConfigError(format!("bad rational coordinate `{s}`")));
        }
    }
    if class.is_empty() {
        errors.push(ConfigError("class coordinates must be non-empty".into()));
    }
}

/// Parse and validate a config file; returns either a usable config or the
/// complete list of problems found.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<ConfigError>> {
    let raw: RawConfig = match serde_json::from_str(text) {
        Ok(raw) => raw,
        Err(e) => return Err(vec![ConfigError(format!("config is not valid JSON: {e}"))]),
    };
    validate_raw(raw)
}

pub fn validate_raw(raw: RawConfig) -> Result<RunConfig, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let overrides = validate_overrides(&raw.overrides.unwrap_or_default(), &mut errors);

    let mode = match raw.mode.as_deref() {
        None => {
            errors.push(ConfigError(
                "missing required key `mode` (scenario|run|classify|mmp)".into(),
            ));
            None
        }
        Some("scenario") => match raw.name.as_deref() {
            None => {
                errors.push(ConfigError(
                    "scenario mode requires `name` (or \"all\")".into(),
                ));
                None
            }
            Some("all") => Some(Mode::AllScenarios),
            Some(name) => {
                if registry_names().contains(&name) {
                    Some(Mode::Scenario { name: name.into() })
                } else {
                    errors.push(ConfigError(format!(
                        "unknown scenario `{}`; available: {}",
                        name,
                        registry_names().join(", ")
                    )));
                    None
                }
            }
        },
        Some("run") => match raw.custom {
            None => {
                errors.push(ConfigError("run mode requires `custom`".into()));
                None
            }
            Some(custom) => {
                validate_custom(&custom, &mut errors);
                Some(Mode::Run {
                    custom: Box::new(custom),
                })
            }
        },
        Some(m @ ("classify" | "mmp")) => {
            let geometry = raw.geometry.clone();
            let class = raw.class.clone();
            if geometry.is_none() {
                errors.push(ConfigError(format!("{m} mode requires `geometry`")));
            }
            if let Some(class) = &class {
                validate_class_strings(class, &mut errors);
            } else {
                errors.push(ConfigError(format!("{m} mode requires `class`")));
            }
            match (geometry, class) {
                (Some(g), Some(c)) => {
                    let geometry = PathBuf::from(g);
                    if m == "classify" {
                        Some(Mode::Classify { geometry, class: c })
                    } else {
                        Some(Mode::Mmp { geometry, class: c })
                    }
                }
                _ => None,
            }
        }
        Some(other) => {
            errors.push(ConfigError(format!(
                "unknown mode `{other}`; expected scenario, run, classify or mmp"
            )));
            None
        }
    };

    match (mode, errors.is_empty()) {
        (Some(mode), true) => Ok(RunConfig {
            mode,
            out: raw.out.map(PathBuf::from).unwrap_or_else(default_out_dir),
            overrides,
            jobs: 1,
        }),
        (_, _) => Err(errors),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_config_parses() {
        let cfg = parse_config(r#"{"mode":"scenario","name":"torus_c1_zero"}"#).unwrap();
        assert!(matches!(cfg.mode, Mode::Scenario { ref name } if name == "torus_c1_zero"));
        assert_eq!(cfg.overrides, Overrides::default());
    }

    #[test]
    fn unknown_scenario_lists_registry() {
        let err = parse_config(r#"{"mode":"scenario","name":"nonexistent"}"#).unwrap_err();
        assert_eq!(err.len(), 1);
        let msg = err[0].to_string();
        assert!(msg.contains("unknown scenario"));
        for name in registry_names() {
            assert!(msg.contains(name), "missing {name} in {msg}");
        }
    }

    #[test]
    fn out_of_range_override_is_rejected() {
        let err = parse_config(
            r#"{"mode":"scenario","name":"torus_c1_zero","overrides":{"N":4}}"#,
        )
        .unwrap_err();
        assert!(err[0].to_string().contains("out of range"));
    }

    #[test]
    fn all_errors_are_collected() {
        let err = parse_config(r#"{"mode":"scenario","overrides":{"N":4,"t_end":-1.0}}"#)
            .unwrap_err();
        assert_eq!(err.len(), 3, "{err:?}");
    }

    #[test]
    fn classify_mode_needs_geometry_and_class() {
        let err = parse_config(r#"{"mode":"classify"}"#).unwrap_err();
        assert_eq!(err.len(), 2);
        let ok = parse_config(
            r#"{"mode":"classify","geometry":"geom.json","class":["4","-1"]}"#,
        )
        .unwrap();
        assert!(matches!(ok.mode, Mode::Classify { .. }));
        let bad = parse_config(
            r#"{"mode":"mmp","geometry":"geom.json","class":["4","x"]}"#,
        )
        .unwrap_err();
        assert!(bad[0].to_string().contains("bad rational"));
    }

    #[test]
    fn field_spec_eval() {
        let f = FieldSpec::constant(1.0).with_term(Wave::Cos, Axis::X, 1, 0.5);
        assert!((f.eval(0.0, 0.3) - 1.5).abs() < 1e-15);
        assert!((f.eval(0.5, 0.0) - 0.5).abs() < 1e-15);
        let e = FieldSpec::wave(Wave::Sin, Axis::Y, 2, 0.1).exponentiated();
        assert!((e.eval(0.2, 0.0) - 1.0).abs() < 1e-15);
    }
}
