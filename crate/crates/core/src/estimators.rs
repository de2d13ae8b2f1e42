//! Conditional crossing probabilities given `W_T = x`, their integrals over the
//! terminal value, and weighted scenario mixtures.
//!
//! Corrected mode divides the Q-conditional expectation by `E_Q[M⁻¹ | W_T]`.
//! Under the factorization assumption this reduces the explicit conditional to
//! the bridge formula at the endpoint `x + u_T`, which is exact when `ᾱ = 0`.
//! Literal mode keeps the unnormalized arithmetic for comparison.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::boundary::{reduce_one_sided, reduce_two_sided, OneSidedProblem, ReducedProblem, Side, TwoSidedProblem};
use crate::bridge::{
    bridge_cross_one_sided, linear_one_sided_marginal, one_sided_from_distances, strip_cross,
    strip_marginal, SeriesControl, SeriesValue,
};
use crate::error::{Error, Result};
use crate::estimate::{Estimate, Method};
use crate::girsanov::GirsanovCoefficients;
use crate::mc::{conditional_bridge_mc, MCControl};
use crate::normal::{gaussian_pdf, normal_cdf, normal_sf};
use crate::quadrature::{adaptive_simpson, gauss_legendre_on, QuadratureControl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Corrected,
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalMethod {
    Explicit,
    Hybrid,
    PaperLiteral,
}

/// A one- or two-sided crossing problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "side", rename_all = "snake_case")]
pub enum Problem {
    OneSided(OneSidedProblem),
    TwoSided(TwoSidedProblem),
}

impl Problem {
    pub fn side(&self) -> Side {
        match self {
            Problem::OneSided(_) => Side::OneSided,
            Problem::TwoSided(_) => Side::TwoSided,
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            Problem::OneSided(p) => p.horizon,
            Problem::TwoSided(p) => p.horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Problem::OneSided(p) => p.validate(),
            Problem::TwoSided(p) => p.validate(),
        }
    }

    pub fn reduce(&self) -> Result<ReducedProblem> {
        match self {
            Problem::OneSided(p) => reduce_one_sided(p),
            Problem::TwoSided(p) => reduce_two_sided(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub weight: f64,
    pub problem: Problem,
}

/// Discrete law of the random boundary, drift and scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMixture {
    pub scenarios: Vec<Scenario>,
}

impl ScenarioMixture {
    pub fn new(scenarios: Vec<(f64, Problem)>) -> Result<Self> {
        let mix = ScenarioMixture {
            scenarios: scenarios
                .into_iter()
                .map(|(weight, problem)| Scenario { weight, problem })
                .collect(),
        };
        mix.validate()?;
        Ok(mix)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .scenarios
            .first()
            .ok_or_else(|| Error::InvalidMixture("no scenarios".into()))?;
        let mut total = 0.0;
        for (i, s) in self.scenarios.iter().enumerate() {
            if !(s.weight > 0.0 && s.weight.is_finite()) {
                return Err(Error::InvalidMixture(format!("scenario {i} has weight {}", s.weight)));
            }
            if s.problem.side() != first.problem.side() {
                return Err(Error::InvalidMixture(format!("scenario {i} is on a different side")));
            }
            total += s.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMixture(format!("weights sum to {total}")));
        }
        Ok(())
    }
}

fn require_side(reduced: &ReducedProblem, side: Side) -> Result<()> {
    if reduced.side() == side {
        Ok(())
    } else {
        Err(Error::SideMismatch {
            expected: match side {
                Side::OneSided => "one_sided",
                Side::TwoSided => "two_sided",
            },
        })
    }
}

/// Corrected explicit conditional `P(cross | W_T = x)` for a one-sided problem:
/// the bridge formula at `x + u_T`, and exactly 1 for `x ≥ b − u_T`.
pub fn conditional_explicit(reduced: &ReducedProblem, x: f64) -> Result<f64> {
    require_side(reduced, Side::OneSided)?;
    bridge_cross_one_sided(reduced.level, reduced.horizon(), x + reduced.u_end())
}

/// Two-sided corrected explicit conditional; exactly 1 outside `[c_T − u_T, b − u_T]`.
pub fn conditional_two_sided_explicit(
    reduced: &ReducedProblem,
    x: f64,
    series: &SeriesControl,
) -> Result<f64> {
    require_side(reduced, Side::TwoSided)?;
    series.validate()?;
    Ok(two_sided_conditional(reduced, x, series).value)
}

fn two_sided_conditional(reduced: &ReducedProblem, x: f64, series: &SeriesControl) -> SeriesValue {
    let c = reduced.lower.expect("two-sided problem");
    let t = reduced.horizon();
    let y = x + reduced.u_end();
    strip_cross(reduced.level, -c.intercept, reduced.level - y, y - c.at(t), t, series)
}

/// Explicit conditional for either side.
fn explicit_any(reduced: &ReducedProblem, x: f64, series: &SeriesControl) -> SeriesValue {
    match reduced.side() {
        Side::OneSided => {
            let y = x + reduced.u_end();
            SeriesValue {
                value: one_sided_from_distances(reduced.level, reduced.level - y, reduced.horizon()),
                terms: 0,
                remainder_bound: 0.0,
                cap_hit: false,
            }
        }
        Side::TwoSided => two_sided_conditional(reduced, x, series),
    }
}

/// Hybrid conditional: `prefactor · Ê_Q[1_cross · e^{±ᾱW̃} | W_T = x]` from the
/// conditional bridge sampler.
///
/// In corrected mode with `ᾱ = 0` the weight is identically one and the explicit
/// value is returned with zero error. Corrected values are clamped; literal ones
/// are not.
pub fn conditional_hybrid(
    reduced: &ReducedProblem,
    coeffs: &GirsanovCoefficients,
    x: f64,
    mc: &MCControl,
    mode: Mode,
) -> Result<Estimate> {
    mc.validate()?;
    if coeffs.alpha_tilde <= 0.0 {
        let explicit = explicit_any(reduced, x, &SeriesControl::default()).value;
        let value = match mode {
            Mode::Corrected => explicit,
            Mode::Literal => (-coeffs.alpha * x + 0.5 * coeffs.i2).exp() * explicit,
        };
        return Ok(finish_conditional(value, 0.0, mode).with("x", x));
    }
    let inner = conditional_bridge_mc(reduced, coeffs, x, mc, mode)?;
    let mut e = finish_conditional(inner.value, inner.error, mode);
    e.diagnostics.extend(inner.diagnostics);
    Ok(e)
}

fn finish_conditional(value: f64, error: f64, mode: Mode) -> Estimate {
    match mode {
        Mode::Corrected => Estimate::clamped(value, error, Method::Hybrid),
        Mode::Literal => Estimate::new(value, error, Method::PaperLiteral),
    }
}

/// Two-sided hybrid conditional; see [`conditional_hybrid`].
pub fn conditional_two_sided_hybrid(
    reduced: &ReducedProblem,
    coeffs: &GirsanovCoefficients,
    x: f64,
    mc: &MCControl,
    mode: Mode,
) -> Result<Estimate> {
    require_side(reduced, Side::TwoSided)?;
    conditional_hybrid(reduced, coeffs, x, mc, mode)
}

/// Interior region of `W_T` where the conditional is below one, cut at
/// `tail_z` standard deviations, and the probability of the region above it.
struct Region {
    lo: f64,
    hi: f64,
    certain: f64,
    tail_bound: f64,
}

fn region(reduced: &ReducedProblem, quad: &QuadratureControl) -> Region {
    let t = reduced.horizon();
    let s = t.sqrt();
    let upper = reduced.level - reduced.u_end();
    let mut certain = normal_sf(upper / s);
    let mut lo = -quad.tail_z * s;
    if let Some(c) = reduced.lower {
        let lower = c.at(t) - reduced.u_end();
        certain += normal_cdf(lower / s);
        lo = lo.max(lower);
    }
    Region {
        lo,
        hi: upper.min(quad.tail_z * s),
        certain,
        tail_bound: 2.0 * normal_cdf(-quad.tail_z),
    }
}

/// Marginal crossing probability: the mass beyond the reduced boundaries plus the
/// Gaussian-weighted integral of the conditional over the interior.
///
/// `hybrid` integrates Monte Carlo conditionals on `quad.mc_nodes` Gauss–Legendre
/// nodes, each with its own substream; its error combines the standard error
/// with the node-rule error of the explicit integrand.
pub fn marginal(
    reduced: &ReducedProblem,
    coeffs: &GirsanovCoefficients,
    method: MarginalMethod,
    quad: &QuadratureControl,
    mc: Option<&MCControl>,
) -> Result<Estimate> {
    quad.validate()?;
    match method {
        MarginalMethod::Explicit => explicit_marginal(reduced, coeffs, quad),
        MarginalMethod::Hybrid => {
            let mc = mc.ok_or_else(|| Error::InvalidControl("hybrid marginal requires mc controls".into()))?;
            hybrid_marginal(reduced, coeffs, quad, mc)
        }
        MarginalMethod::PaperLiteral => paper_literal_marginal(reduced, coeffs, quad),
    }
}

fn explicit_marginal(
    reduced: &ReducedProblem,
    coeffs: &GirsanovCoefficients,
    quad: &QuadratureControl,
) -> Result<Estimate> {
    let series = SeriesControl::default();
    let t = reduced.horizon();
    let r = region(reduced, quad);
    let remainder = Cell::new(0.0_f64);
    let cap_hit = Cell::new(false);
    let q = adaptive_simpson(
        |x| {
            let v = explicit_any(reduced, x, &series);
            remainder.set(remainder.get().max(v.remainder_bound));
            cap_hit.set(cap_hit.get() || v.cap_hit);
            gaussian_pdf(x, t) * v.value
        },
        r.lo,
        r.hi,
        quad.tol,
        quad.max_intervals,
    );
    let raw = r.certain + q.value;
    let series_error = remainder.get().min(1.0) * (r.hi - r.lo).max(0.0) * gaussian_pdf(0.0, t);
    let error = q.error + r.tail_bound + series_error;
    if q.budget_exceeded {
        return Err(Error::QuadratureBudgetExceeded {
            estimate: raw,
            bound: error,
        });
    }
    Ok(with_coefficients(Estimate::clamped(raw, error, Method::Explicit), coeffs)
        .with("tail_bound", r.tail_bound)
        .with("quad_intervals", q.intervals as f64)
        .with("series_cap_hit", if cap_hit.get() { 1.0 } else { 0.0 }))
}

fn with_coefficients(e: Estimate, coeffs: &GirsanovCoefficients) -> Estimate {
    e.with("alpha", coeffs.alpha)
        .with("alpha_tilde", coeffs.alpha_tilde)
        .with("rho", coeffs.rho)
}

fn hybrid_marginal(
    reduced: &ReducedProblem,
    coeffs: &GirsanovCoefficients,
    quad: &QuadratureControl,
    mc: &MCControl,
) -> Result<Estimate> {
    mc.validate()?;
    let t = reduced.horizon();
    let r = region(reduced, quad);
    let series = SeriesControl::default();
    let (nodes, weights) = gauss_legendre_on(quad.mc_nodes, r.lo, r.hi);
    let (mut sum, mut var, mut explicit_rule) = (r.certain, 0.0, r.certain);
    let mut clamped = 0usize;
    for (i, (&x, &w)) in nodes.iter().zip(&weights).enumerate() {
        let density = w * gaussian_pdf(x, t);
        let c = conditional_hybrid(reduced, coeffs, x, &mc.substream(i as u64), Mode::Corrected)?;
        if c.diagnostic("clamped") == Some(1.0) {
            clamped += 1;
        }
        sum += density * c.diagnostic("raw_value").unwrap_or(c.value);
        var += (density * c.error).powi(2);
        explicit_rule += density * explicit_any(reduced, x, &series).value;
    }
    let explicit = explicit_marginal(reduced, coeffs, quad)?;
    let rule_error = (explicit_rule - explicit.diagnostic("raw_value").unwrap_or(explicit.value)).abs();
    let se = var.sqrt();
    let error = se.hypot(rule_error + r.tail_bound);
    Ok(with_coefficients(Estimate::clamped(sum, error, Method::Hybrid), coeffs)
        .with("standard_error", se)
        .with("node_rule_error", rule_error)
        .with("tail_bound", r.tail_bound)
        .with("nodes", quad.mc_nodes as f64)
        .with("clamped_nodes", clamped as f64)
        .with("explicit_value", explicit.value))
}

/// The literal marginal:
/// `tails + ∫ φ_T(x)·e^{−αx + I2/2}·P_bridge(x)·e^{ᾱ I_cross}·e^{ᾱ²/2} dx`
/// over the interior region. Never clamped; the corrected explicit value and the
/// divergence from it are recorded in diagnostics.
pub fn paper_literal_marginal(
    reduced: &ReducedProblem,
    coeffs: &GirsanovCoefficients,
    quad: &QuadratureControl,
) -> Result<Estimate> {
    quad.validate()?;
    let series = SeriesControl::default();
    let t = reduced.horizon();
    let s = t.sqrt();
    let r = region(reduced, quad);
    let alpha = coeffs.alpha;
    // e^{−αx}φ_T(x) is a Gaussian centred at −αT
    let centre = -alpha * t;
    let lo = (centre - quad.tail_z * s).min(-quad.tail_z * s);
    let lo = match reduced.lower {
        Some(c) => lo.max(c.at(t) - reduced.u_end()),
        None => lo,
    };
    let hi = (reduced.level - reduced.u_end()).min((centre + quad.tail_z * s).max(quad.tail_z * s));
    let at = coeffs.alpha_tilde;
    let log_factor = 0.5 * coeffs.i2 + at * coeffs.i_cross + 0.5 * at * at;
    let q = adaptive_simpson(
        |x| gaussian_pdf(x, t) * (log_factor - alpha * x).exp() * explicit_any(reduced, x, &series).value,
        lo,
        hi,
        quad.tol,
        quad.max_intervals,
    );
    let value = r.certain + q.value;
    let error = q.error + r.tail_bound * (0.5 * alpha * alpha * t + log_factor).exp();
    if q.budget_exceeded {
        return Err(Error::QuadratureBudgetExceeded { estimate: value, bound: error });
    }
    let corrected = explicit_marginal(reduced, coeffs, quad)?;
    Ok(with_coefficients(Estimate::new(value, error, Method::PaperLiteral), coeffs)
        .with("corrected_value", corrected.value)
        .with("divergence", value - corrected.value)
        .with("quad_intervals", q.intervals as f64))
}

/// Closed form for problems whose reduced shift is linear, `u_t = −a·t`:
/// the one-sided line formula, or the two-line series integrated over `W_T`.
pub fn closed_form_marginal(
    reduced: &ReducedProblem,
    coeffs: &GirsanovCoefficients,
    series: &SeriesControl,
    quad: &QuadratureControl,
) -> Result<Estimate> {
    if coeffs.alpha_tilde > 0.0 {
        return Err(Error::NotApplicable(
            "closed_form needs a boundary that is linear after removing the drift".into(),
        ));
    }
    let (a, b, t) = (-coeffs.alpha, reduced.level, reduced.horizon());
    let e = match reduced.lower {
        None => Estimate::new(linear_one_sided_marginal(a, b, t)?, 0.0, Method::ClosedForm),
        Some(c) => strip_marginal((b, a), (c.intercept, c.slope + a), t, series, quad)?,
    };
    Ok(with_coefficients(e, coeffs))
}

/// Marginal of a raw problem: reduces it and resolves the coefficients first.
pub fn problem_marginal(
    problem: &Problem,
    method: MarginalMethod,
    quad: &QuadratureControl,
    mc: Option<&MCControl>,
) -> Result<Estimate> {
    let reduced = problem.reduce()?;
    let coeffs = GirsanovCoefficients::resolve(&reduced)?;
    marginal(&reduced, &coeffs, method, quad, mc)
}

/// `Σ wᵢ · marginal(scenarioᵢ)` with error `Σ wᵢ · errorᵢ`.
pub fn mixture_marginal(
    mix: &ScenarioMixture,
    method: MarginalMethod,
    quad: &QuadratureControl,
    mc: Option<&MCControl>,
) -> Result<Estimate> {
    mix.validate()?;
    let mut parts = Vec::with_capacity(mix.scenarios.len());
    for (index, s) in mix.scenarios.iter().enumerate() {
        let sub_mc = mc.map(|m| m.substream(index as u64));
        let e = problem_marginal(&s.problem, method, quad, sub_mc.as_ref()).map_err(|source| Error::Scenario {
            index,
            source: Box::new(source),
        })?;
        parts.push((s.weight, e));
    }
    let value: f64 = parts.iter().map(|(w, e)| w * e.value).sum();
    let error: f64 = parts.iter().map(|(w, e)| w * e.error).sum();
    let mut out = Estimate::clamped(value, error, Method::Mixture);
    for (i, (w, e)) in parts.iter().enumerate() {
        out.diagnostics.insert(format!("scenario_{i}_weight"), *w);
        out.diagnostics.insert(format!("scenario_{i}_value"), e.value);
        out.diagnostics.insert(format!("scenario_{i}_error"), e.error);
    }
    Ok(out)
}
