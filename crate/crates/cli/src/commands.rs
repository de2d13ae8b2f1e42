//! The four subcommands, producing serializable reports.

use std::collections::BTreeMap;
use std::time::Instant;

use bcross_core::{
    closed_form_marginal, decomposition_stats, factorization_gap, girsanov_importance_mc, marginal,
    mixture_marginal, path_mc_one_sided, path_mc_two_sided, split_marginal,
    split_marginal_two_sided, DecompositionReport, Direction, Estimate, GirsanovCoefficients,
    MarginalMethod, Problem, ReducedProblem, ScenarioMixture,
};
use serde::Serialize;
use serde_json::Value;

use crate::config::{self, MethodName, MethodSpec, RunConfig, Target};
use crate::error::{CliError, CliResult};

/// One estimate in a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub method: MethodName,
    pub value: f64,
    pub error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

struct Prepared {
    problem: Problem,
    reduced: ReducedProblem,
    coeffs: GirsanovCoefficients,
}

fn prepare(problem: &Problem, pointer: &str) -> CliResult<Prepared> {
    let reduced = problem.reduce().map_err(|e| CliError::from_core(e, pointer))?;
    let coeffs = GirsanovCoefficients::resolve(&reduced).map_err(|e| CliError::from_core(e, pointer))?;
    Ok(Prepared {
        problem: problem.clone(),
        reduced,
        coeffs,
    })
}

fn marginal_method(name: MethodName) -> Option<MarginalMethod> {
    match name {
        MethodName::Explicit => Some(MarginalMethod::Explicit),
        MethodName::Hybrid => Some(MarginalMethod::Hybrid),
        MethodName::PaperLiteral => Some(MarginalMethod::PaperLiteral),
        _ => None,
    }
}

fn estimate_single(p: &Prepared, spec: &MethodSpec) -> bcross_core::Result<Estimate> {
    let mut e = match spec.name {
        MethodName::ClosedForm => closed_form_marginal(&p.reduced, &p.coeffs, &spec.series, &spec.quad)?,
        MethodName::Explicit | MethodName::Hybrid | MethodName::PaperLiteral => marginal(
            &p.reduced,
            &p.coeffs,
            marginal_method(spec.name).unwrap(),
            &spec.quad,
            Some(&spec.mc),
        )?,
        MethodName::PathMc => match &p.problem {
            Problem::OneSided(q) => path_mc_one_sided(q, &spec.mc)?,
            Problem::TwoSided(q) => path_mc_two_sided(q, &spec.mc)?,
        },
        MethodName::ImportanceMc => girsanov_importance_mc(&p.reduced, &p.coeffs, &spec.mc, Direction::QToP)?,
        MethodName::Timesplit => match &p.problem {
            Problem::OneSided(q) => split_marginal(q, &spec.split)?,
            Problem::TwoSided(q) => split_marginal_two_sided(q, &spec.split)?,
        },
    };
    let c = &p.coeffs;
    for (key, value) in [
        ("alpha", c.alpha),
        ("alpha_tilde", c.alpha_tilde),
        ("rho", c.rho),
        ("I1", c.i1),
        ("I2", c.i2),
    ] {
        e.diagnostics.entry(key.to_string()).or_insert(value);
    }
    Ok(e)
}

fn estimate_mixture(mix: &ScenarioMixture, spec: &MethodSpec) -> bcross_core::Result<Estimate> {
    if let Some(method) = marginal_method(spec.name) {
        return mixture_marginal(mix, method, &spec.quad, Some(&spec.mc));
    }
    let (mut value, mut error) = (0.0, 0.0);
    let mut diagnostics = BTreeMap::new();
    for (index, s) in mix.scenarios.iter().enumerate() {
        let scenario_spec = MethodSpec {
            mc: spec.mc.substream(index as u64),
            ..spec.clone()
        };
        let wrap = |source| bcross_core::Error::Scenario {
            index,
            source: Box::new(source),
        };
        let reduced = s.problem.reduce().map_err(wrap)?;
        let coeffs = GirsanovCoefficients::resolve(&reduced).map_err(wrap)?;
        let prepared = Prepared {
            problem: s.problem.clone(),
            reduced,
            coeffs,
        };
        let e = estimate_single(&prepared, &scenario_spec).map_err(wrap)?;
        value += s.weight * e.value;
        error += s.weight * e.error;
        diagnostics.insert(format!("scenario_{index}_weight"), s.weight);
        diagnostics.insert(format!("scenario_{index}_value"), e.value);
        diagnostics.insert(format!("scenario_{index}_error"), e.error);
    }
    let mut e = Estimate::clamped(value, error, bcross_core::Method::Mixture);
    e.diagnostics.extend(diagnostics);
    Ok(e)
}

fn method_pointer(config: &RunConfig, name: MethodName) -> String {
    match config.methods.iter().position(|m| m.name == name) {
        Some(i) => format!("/methods/{i}"),
        None => "/reference".to_string(),
    }
}

/// Evaluates one method on the config target.
pub fn evaluate(config: &RunConfig, target: &Target, spec: &MethodSpec, timing: bool) -> CliResult<Record> {
    let start = Instant::now();
    let estimate = match target {
        Target::Single(problem) => {
            let prepared = prepare(problem, "/problem")?;
            estimate_single(&prepared, spec)
        }
        Target::Mixture(mix) => estimate_mixture(mix, spec),
    }
    .map_err(|e| CliError::from_core(e, &method_pointer(config, spec.name)))?;
    Ok(Record {
        method: spec.name,
        value: estimate.value,
        error: estimate.error,
        runtime_ms: timing.then(|| start.elapsed().as_secs_f64() * 1e3),
        diagnostics: estimate.diagnostics,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub command: &'static str,
    pub config: RunConfig,
    pub records: Vec<Record>,
}

pub fn eval(config: &RunConfig, timing: bool) -> CliResult<EvalReport> {
    config.require_methods()?;
    let target = config.target()?;
    let records = config
        .methods
        .iter()
        .map(|spec| evaluate(config, &target, spec, timing))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(EvalReport {
        command: "eval",
        config: config.clone(),
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub method: MethodName,
    pub value: f64,
    pub error: f64,
    pub delta_vs_reference: f64,
    /// `delta / hypot(error, reference error)`; zero when the delta is zero.
    pub sigmas: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub command: &'static str,
    pub config: RunConfig,
    pub reference: Record,
    pub rows: Vec<CompareRow>,
}

pub fn compare(config: &RunConfig, timing: bool) -> CliResult<CompareReport> {
    config.require_methods()?;
    let target = config.target()?;
    let records = config
        .methods
        .iter()
        .map(|spec| evaluate(config, &target, spec, timing))
        .collect::<CliResult<Vec<_>>>()?;
    let reference = match records.iter().find(|r| r.method == config.reference) {
        Some(r) => r.clone(),
        None => evaluate(config, &target, &config.spec_for(config.reference), timing)?,
    };
    let rows = records
        .into_iter()
        .map(|r| {
            let delta = r.value - reference.value;
            let combined = r.error.hypot(reference.error);
            CompareRow {
                method: r.method,
                value: r.value,
                error: r.error,
                delta_vs_reference: delta,
                sigmas: if delta == 0.0 { 0.0 } else { delta / combined },
                diagnostics: r.diagnostics,
            }
        })
        .collect();
    Ok(CompareReport {
        command: "compare",
        config: config.clone(),
        reference,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficients {
    #[serde(rename = "I1")]
    pub i1: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    pub alpha: f64,
    pub alpha_tilde: f64,
    pub rho: f64,
    pub i_cross: f64,
}

/// Decomposition statistics with their pass/fail flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionCheck {
    pub stats: DecompositionReport,
    pub residual_ok: bool,
    pub integrals_ok: bool,
    pub mean_ok: bool,
    pub var_ok: bool,
    pub corr_ok: bool,
    pub q_mean_ok: bool,
    pub q_var_ok: bool,
    pub end_mean_ok: bool,
}

impl DecompositionCheck {
    pub fn new(stats: DecompositionReport) -> Self {
        let s = &stats;
        DecompositionCheck {
            residual_ok: s.max_residual <= 1e-10,
            integrals_ok: s.theta_tilde_integral.abs() <= 1e-10
                && (s.theta_tilde_square_integral - 1.0).abs() <= 1e-10
                && s.i_cross_minus_alpha_tilde.abs() <= 1e-10,
            mean_ok: s.mean_w_tilde.abs() <= s.mean_band,
            var_ok: (s.var_w_tilde - 1.0).abs() <= s.var_band,
            corr_ok: s.corr_w_end_w_tilde.abs() <= s.mean_band,
            q_mean_ok: s.q_mean.abs() <= s.mean_band,
            q_var_ok: (s.q_var - 1.0).abs() <= s.var_band,
            end_mean_ok: s.end_mean.abs() <= s.end_mean_band,
            stats,
        }
    }

    pub fn all_ok(&self) -> bool {
        self.residual_ok
            && self.integrals_ok
            && self.mean_ok
            && self.var_ok
            && self.corr_ok
            && self.q_mean_ok
            && self.q_var_ok
            && self.end_mean_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub x: f64,
    pub gap: f64,
    pub se: f64,
    pub normalized: f64,
    /// `|gap| ≤ 3·se`
    pub within_band: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnoseReport {
    pub command: &'static str,
    pub config: RunConfig,
    /// `u ≡ 0`: no change of measure is needed and the decomposition is skipped.
    pub girsanov_bypass: bool,
    pub coefficients: Coefficients,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionCheck>,
    pub gaps: Vec<GapRow>,
}

pub fn diagnose(config: &RunConfig) -> CliResult<DiagnoseReport> {
    let problem = match config.target()? {
        Target::Single(p) => p,
        Target::Mixture(_) => return Err(CliError::validation("/mixture", "diagnose needs a single problem")),
    };
    let p = prepare(&problem, "/problem")?;
    let mc = config.controls.mc;
    let numeric = |e| CliError::from_core(e, "/controls/mc");
    let bypass = p.coeffs.degenerate;
    let decomposition = if bypass {
        None
    } else {
        Some(DecompositionCheck::new(decomposition_stats(&p.reduced, &p.coeffs, &mc).map_err(numeric)?))
    };
    let gaps = config
        .diagnose
        .x_grid
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let g = factorization_gap(&p.reduced, &p.coeffs, x, &mc.substream(i as u64)).map_err(numeric)?;
            Ok(GapRow {
                x,
                gap: g.gap,
                se: g.se,
                normalized: g.normalized,
                within_band: g.gap.abs() <= 3.0 * g.se,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let c = &p.coeffs;
    Ok(DiagnoseReport {
        command: "diagnose",
        config: config.clone(),
        girsanov_bypass: bypass,
        coefficients: Coefficients {
            i1: c.i1,
            i2: c.i2,
            alpha: c.alpha,
            alpha_tilde: c.alpha_tilde,
            rho: c.rho,
            i_cross: c.i_cross,
        },
        decomposition,
        gaps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Parameter values in the order of `sweep.parameters`.
    pub point: Vec<Value>,
    pub method: MethodName,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub command: &'static str,
    pub config: RunConfig,
    pub parameters: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// Cartesian sweep; the last parameter varies fastest. `root` is the config
/// value the sweep points are applied to.
pub fn sweep(root: &Value, config: &RunConfig, timing: bool) -> CliResult<SweepReport> {
    config.require_methods()?;
    let params = &config.sweep.parameters;
    let parameters: Vec<String> = params.iter().map(|p| p.path.clone()).collect();
    let mut rows = Vec::new();
    let total: usize = if params.is_empty() {
        0
    } else {
        params.iter().map(|p| p.values.len()).product()
    };
    for flat in 0..total {
        let mut rest = flat;
        let mut point = vec![Value::Null; params.len()];
        for (k, p) in params.iter().enumerate().rev() {
            point[k] = p.values[rest % p.values.len()].clone();
            rest /= p.values.len();
        }
        let mut value = root.clone();
        for (p, v) in params.iter().zip(&point) {
            config::set_path(&mut value, &p.path, v.clone())?;
        }
        let point_config = config::from_value(value)?;
        let target = point_config.target()?;
        for spec in &point_config.methods {
            let r = evaluate(&point_config, &target, spec, timing)?;
            rows.push(SweepRow {
                point: point.clone(),
                method: r.method,
                value: r.value,
                error: r.error,
            });
        }
    }
    Ok(SweepReport {
        command: "sweep",
        config: config.clone(),
        parameters,
        rows,
    })
}
