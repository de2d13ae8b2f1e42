//! Run configuration: JSON schema types, dotted-path overrides and resolution
//! into engine problems.
//!
//! Loading goes through a `serde_json::Value` stage so that overrides and sweep
//! points can be applied by path before typed parsing. Method entries may be
//! bare names; each method inherits the global `controls` with its own fields
//! laid over them.

use std::fmt;

use bcross_core::{
    BoundaryCurve, MCControl, OneSidedProblem, Problem, QuadratureControl, Scenario,
    ScenarioMixture, SeriesControl, Side, SplitControl, TwoSidedProblem,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    ClosedForm,
    Explicit,
    Hybrid,
    PaperLiteral,
    PathMc,
    ImportanceMc,
    Timesplit,
}

impl MethodName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::ClosedForm => "closed_form",
            MethodName::Explicit => "explicit",
            MethodName::Hybrid => "hybrid",
            MethodName::PaperLiteral => "paper_literal",
            MethodName::PathMc => "path_mc",
            MethodName::ImportanceMc => "importance_mc",
            MethodName::Timesplit => "timesplit",
        }
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Numerical controls; every method gets a full copy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Controls {
    pub quad: QuadratureControl,
    pub mc: MCControl,
    pub split: SplitControl,
    pub series: SeriesControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: MethodName,
    #[serde(default)]
    pub quad: QuadratureControl,
    #[serde(default)]
    pub mc: MCControl,
    #[serde(default)]
    pub split: SplitControl,
    #[serde(default)]
    pub series: SeriesControl,
}

impl MethodSpec {
    pub fn with_controls(name: MethodName, controls: &Controls) -> Self {
        MethodSpec {
            name,
            quad: controls.quad,
            mc: controls.mc,
            split: controls.split,
            series: controls.series,
        }
    }
}

fn default_side() -> Side {
    Side::OneSided
}
fn default_sigma() -> f64 {
    1.0
}
fn default_drift() -> BoundaryCurve {
    BoundaryCurve::constant(0.0)
}
fn default_grid_size() -> usize {
    bcross_core::boundary::DEFAULT_GRID_SIZE
}

/// One crossing problem. One-sided problems use `boundary`; two-sided problems
/// use `upper`, `lower` and `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    #[serde(default = "default_side")]
    pub side: Side,
    pub horizon: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_drift")]
    pub drift: BoundaryCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<BoundaryCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<BoundaryCurve>,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
}

impl ProblemBlock {
    /// Engine problem for this block; `pointer` locates the block in the config.
    pub fn to_problem(&self, pointer: &str) -> CliResult<Problem> {
        let at = |field: &str| format!("{pointer}/{field}");
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(CliError::validation(at("sigma"), format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(CliError::validation(at("horizon"), format!("horizon must be positive, got {}", self.horizon)));
        }
        let problem = match self.side {
            Side::OneSided => {
                for (field, v) in [("upper", &self.upper), ("lower", &self.lower)] {
                    if v.is_some() {
                        return Err(CliError::validation(at(field), "not allowed for a one-sided problem; use boundary"));
                    }
                }
                let boundary = self
                    .boundary
                    .clone()
                    .ok_or_else(|| CliError::validation(at("boundary"), "missing boundary"))?;
                Problem::OneSided(OneSidedProblem {
                    drift: self.drift.clone(),
                    sigma: self.sigma,
                    boundary,
                    horizon: self.horizon,
                    grid_size: self.grid_size,
                })
            }
            Side::TwoSided => {
                if self.boundary.is_some() {
                    return Err(CliError::validation(at("boundary"), "not allowed for a two-sided problem; use upper and lower"));
                }
                let upper = self.upper.clone().ok_or_else(|| CliError::validation(at("upper"), "missing upper"))?;
                let lower = self.lower.clone().ok_or_else(|| CliError::validation(at("lower"), "missing lower"))?;
                Problem::TwoSided(TwoSidedProblem {
                    drift: self.drift.clone(),
                    sigma: self.sigma,
                    upper,
                    lower,
                    beta: self.beta,
                    horizon: self.horizon,
                    grid_size: self.grid_size,
                })
            }
        };
        problem.validate().map_err(|e| {
            let field = field_of(&e, self.side);
            CliError::from_core(e, &field.map(at).unwrap_or_else(|| pointer.to_string()))
        })?;
        Ok(problem)
    }
}

/// Config field most likely responsible for a problem validation error.
fn field_of(err: &bcross_core::Error, side: Side) -> Option<&'static str> {
    use bcross_core::Error as E;
    let boundary = match side {
        Side::OneSided => "boundary",
        Side::TwoSided => "upper",
    };
    Some(match err {
        E::SigmaNonpositive(_) => "sigma",
        E::InvalidHorizon(_) => "horizon",
        E::GridTooSmall(_) => "grid_size",
        E::StartOnOrAboveBoundary { .. } => boundary,
        E::OrderingViolated { .. } => "lower",
        E::BetaRestrictionViolated { .. } => "beta",
        E::NonfiniteCurve { what, .. } => match *what {
            "drift" => "drift",
            "lower boundary" => "lower",
            _ => boundary,
        },
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureEntry {
    pub weight: f64,
    pub problem: ProblemBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseBlock {
    /// Terminal values at which the factorization gap is estimated.
    pub x_grid: Vec<f64>,
}

impl Default for DiagnoseBlock {
    fn default() -> Self {
        DiagnoseBlock {
            x_grid: vec![-1.0, 0.0, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParameter {
    /// Dotted path into the config, e.g. `problem.boundary.slope`.
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub parameters: Vec<SweepParameter>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub format: Format,
    /// Report file; standard output when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

fn default_reference() -> MethodName {
    MethodName::PathMc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<Vec<MixtureEntry>>,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub controls: Controls,
    /// Method that `compare` measures every row against.
    #[serde(default = "default_reference")]
    pub reference: MethodName,
    #[serde(default)]
    pub diagnose: DiagnoseBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub output: OutputBlock,
    /// Seed of every Monte Carlo method; overrides `mc.seed` everywhere.
    #[serde(default)]
    pub seed: u64,
}

/// What a config asks to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Single(Problem),
    Mixture(ScenarioMixture),
}

impl RunConfig {
    pub fn target(&self) -> CliResult<Target> {
        match (&self.problem, &self.mixture) {
            (Some(p), None) => Ok(Target::Single(p.to_problem("/problem")?)),
            (None, Some(entries)) => {
                let mut scenarios = Vec::with_capacity(entries.len());
                for (i, e) in entries.iter().enumerate() {
                    let problem = e.problem.to_problem(&format!("/mixture/{i}/problem"))?;
                    scenarios.push(Scenario {
                        weight: e.weight,
                        problem,
                    });
                }
                let mix = ScenarioMixture { scenarios };
                mix.validate().map_err(|e| CliError::from_core(e, "/mixture"))?;
                Ok(Target::Mixture(mix))
            }
            (Some(_), Some(_)) => Err(CliError::validation("", "give exactly one of problem and mixture")),
            (None, None) => Err(CliError::validation("", "missing problem or mixture")),
        }
    }

    pub fn require_methods(&self) -> CliResult<()> {
        if self.methods.is_empty() {
            Err(CliError::validation("/methods", "at least one method is required"))
        } else {
            Ok(())
        }
    }

    /// Spec for `name`: the configured entry, or the global controls.
    pub fn spec_for(&self, name: MethodName) -> MethodSpec {
        self.methods
            .iter()
            .find(|m| m.name == name)
            .cloned()
            .unwrap_or_else(|| {
                let mut spec = MethodSpec::with_controls(name, &self.controls);
                spec.mc.seed = self.seed;
                spec
            })
    }
}

pub fn parse_json(text: &str) -> CliResult<Value> {
    serde_json::from_str(text).map_err(|e| CliError::Validation {
        pointer: None,
        message: format!("malformed JSON: {e}"),
    })
}

/// Parses `path=value`; the value is read as JSON when possible and as a string otherwise.
pub fn parse_assignment(text: &str) -> CliResult<(String, Value)> {
    let (path, raw) = text.split_once('=').ok_or_else(|| CliError::Validation {
        pointer: None,
        message: format!("override {text:?} is not of the form path=value"),
    })?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((path.trim().to_string(), value))
}

/// Sets the field at a dotted path, creating objects on the way. Numeric
/// segments index arrays.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> CliResult<()> {
    let pointer = dotted_to_pointer(path);
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::validation(pointer, "empty path segment"));
    }
    let mut node = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string()).or_insert(Value::Null)
            }
            Value::Array(items) => {
                let index: usize = seg
                    .parse()
                    .map_err(|_| CliError::validation(pointer.clone(), format!("{seg:?} is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(index)
                    .ok_or_else(|| CliError::validation(pointer.clone(), format!("index {index} out of range ({len} items)")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(CliError::validation(pointer, format!("{seg:?} is inside a non-object value"))),
        };
    }
    Ok(())
}

pub fn dotted_to_pointer(path: &str) -> String {
    path.split('.').map(|s| format!("/{s}")).collect()
}

/// Converts a serde path such as `methods[0].mc.n_paths` to `/methods/0/mc/n_paths`.
fn serde_path_to_pointer(path: &str) -> String {
    if path == "." || path.is_empty() {
        return String::new();
    }
    path.replace('[', ".")
        .replace(']', "")
        .split('.')
        .filter(|s| !s.is_empty())
        .map(|s| format!("/{s}"))
        .collect()
}

fn merge(base: &Value, over: &Value) -> Value {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            let mut out = b.clone();
            for (k, v) in o {
                let merged = match out.get(k) {
                    Some(existing) => merge(existing, v),
                    None => v.clone(),
                };
                out.insert(k.clone(), merged);
            }
            Value::Object(out)
        }
        _ => over.clone(),
    }
}

/// Expands bare method names and lays each method's controls over the global ones.
fn normalize(mut root: Value) -> CliResult<Value> {
    let Value::Object(map) = &mut root else {
        return Err(CliError::validation("", "config must be a JSON object"));
    };
    let controls = map.get("controls").cloned().unwrap_or(Value::Object(Map::new()));
    if let Some(Value::Array(methods)) = map.get_mut("methods") {
        for m in methods.iter_mut() {
            if let Value::String(name) = m {
                *m = serde_json::json!({ "name": name });
            }
            if let Value::Object(entry) = m {
                for key in ["quad", "mc", "split", "series"] {
                    let global = controls.get(key).cloned().unwrap_or(Value::Object(Map::new()));
                    let own = entry.get(key).cloned().unwrap_or(Value::Object(Map::new()));
                    entry.insert(key.to_string(), merge(&global, &own));
                }
            }
        }
    }
    Ok(root)
}

/// Typed config from a JSON value with all overrides applied.
pub fn from_value(root: Value) -> CliResult<RunConfig> {
    let normalized = normalize(root)?;
    let mut config: RunConfig = serde_path_to_error::deserialize(normalized).map_err(|e| CliError::Validation {
        pointer: Some(serde_path_to_pointer(&e.path().to_string())),
        message: e.inner().to_string(),
    })?;
    let seed = config.seed;
    config.controls.mc.seed = seed;
    for m in &mut config.methods {
        m.mc.seed = seed;
    }
    Ok(config)
}

/// Reads a config, applying `overrides` (dotted path, value) in order.
pub fn load(text: &str, overrides: &[(String, Value)]) -> CliResult<(Value, RunConfig)> {
    let mut root = parse_json(text)?;
    for (path, value) in overrides {
        set_path(&mut root, path, value.clone())?;
    }
    let config = from_value(root.clone())?;
    Ok((root, config))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "problem": {"horizon": 1, "boundary": {"kind": "constant", "level": 1}},
        "methods": ["closed_form", {"name": "path_mc", "mc": {"n_paths": 1000}}],
        "controls": {"mc": {"n_steps": 64}},
        "seed": 5
    }"#;

    #[test]
    fn defaults_and_inheritance() {
        let (_, c) = load(BASE, &[]).unwrap();
        assert_eq!(c.methods.len(), 2);
        let mc = c.methods[1].mc;
        assert_eq!((mc.n_paths, mc.n_steps, mc.seed), (1000, 64, 5));
        assert_eq!(c.methods[0].mc.n_steps, 64);
        assert_eq!(c.reference, MethodName::PathMc);
        assert!(matches!(c.target().unwrap(), Target::Single(Problem::OneSided(_))));
    }

    #[test]
    fn overrides_by_path() {
        let (_, c) = load(
            BASE,
            &[
                parse_assignment("problem.sigma=2").unwrap(),
                parse_assignment("methods.1.mc.n_paths=500").unwrap(),
                parse_assignment("output.format=csv").unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(c.problem.unwrap().sigma, 2.0);
        assert_eq!(c.methods[1].mc.n_paths, 500);
        assert_eq!(c.output.format, Format::Csv);
        assert!(set_path(&mut serde_json::json!({"a": 1}), "a.b", Value::Null).is_err());
    }

    #[test]
    fn schema_errors_carry_pointers() {
        let err = load(BASE, &[parse_assignment("methods.1.mc.n_paths=\"many\"").unwrap()]).unwrap_err();
        match err {
            CliError::Validation { pointer, .. } => assert_eq!(pointer.as_deref(), Some("/methods/1/mc/n_paths")),
            other => panic!("{other:?}"),
        }
        let err = load(BASE, &[parse_assignment("problem.colour=1").unwrap()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn negative_sigma_names_the_field() {
        let (_, c) = load(BASE, &[parse_assignment("problem.sigma=-1").unwrap()]).unwrap();
        match c.target().unwrap_err() {
            CliError::Validation { pointer, .. } => assert_eq!(pointer.as_deref(), Some("/problem/sigma")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exactly_one_target() {
        let (_, c) = load(r#"{"methods": ["explicit"]}"#, &[]).unwrap();
        assert!(c.target().is_err());
    }

    #[test]
    fn pointer_conversion() {
        assert_eq!(serde_path_to_pointer("methods[0].mc.n_paths"), "/methods/0/mc/n_paths");
        assert_eq!(serde_path_to_pointer("."), "");
        assert_eq!(dotted_to_pointer("problem.sigma"), "/problem/sigma");
    }
}
