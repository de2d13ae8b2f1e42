use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// How an [`Estimate`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Explicit,
    Hybrid,
    PaperLiteral,
    PathMc,
    ImportanceMc,
    BridgeMc,
    Timesplit,
    Mixture,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Explicit => "explicit",
            Method::Hybrid => "hybrid",
            Method::PaperLiteral => "paper_literal",
            Method::PathMc => "path_mc",
            Method::ImportanceMc => "importance_mc",
            Method::BridgeMc => "bridge_mc",
            Method::Timesplit => "timesplit",
            Method::Mixture => "mixture",
        }
    }

    /// Whether the error figure is a Monte Carlo standard error.
    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            Method::Hybrid | Method::PathMc | Method::ImportanceMc | Method::BridgeMc
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named diagnostic values; flags are stored as 0/1. Ordered for stable output.
pub type Diagnostics = BTreeMap<String, f64>;

/// A probability with its uncertainty.
///
/// `error` is a standard error for Monte Carlo methods and a quadrature plus
/// truncation bound for deterministic ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl Estimate {
    pub fn new(value: f64, error: f64, method: Method) -> Self {
        Estimate {
            value,
            error: error.abs(),
            method,
            diagnostics: Diagnostics::new(),
        }
    }

    /// Clamps `raw` into `[0, 1]`, keeping the raw value and a flag in diagnostics.
    pub fn clamped(raw: f64, error: f64, method: Method) -> Self {
        let value = raw.clamp(0.0, 1.0);
        let mut e = Estimate::new(value, error, method);
        e.diagnostics.insert("raw_value".into(), raw);
        e.diagnostics
            .insert("clamped".into(), if value != raw { 1.0 } else { 0.0 });
        e
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    /// `|self − other|` in units of the combined error.
    pub fn sigmas_from(&self, other: &Estimate) -> f64 {
        let combined = self.error.hypot(other.error);
        let delta = (self.value - other.value).abs();
        if delta == 0.0 {
            0.0
        } else {
            delta / combined
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamping_keeps_raw_value() {
        let e = Estimate::clamped(1.2, 0.1, Method::Hybrid);
        assert_eq!(e.value, 1.0);
        assert_eq!(e.diagnostic("raw_value"), Some(1.2));
        assert_eq!(e.diagnostic("clamped"), Some(1.0));
        let e = Estimate::clamped(0.3, 0.1, Method::Explicit);
        assert_eq!(e.diagnostic("clamped"), Some(0.0));
    }

    #[test]
    fn sigma_distance() {
        let a = Estimate::new(0.5, 0.03, Method::PathMc);
        let b = Estimate::new(0.4, 0.04, Method::ImportanceMc);
        assert!((a.sigmas_from(&b) - 2.0).abs() < 1e-12);
        assert_eq!(a.sigmas_from(&a.clone()), 0.0);
    }
}
