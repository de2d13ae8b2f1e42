//! Crossing probabilities by chaining local bridge kernels over a partition of
//! the horizon.
//!
//! With `B(t) = (g(t) − μ(t))/σ` the problem is Brownian motion `W` against `B`.
//! The density of `W` at split time `t_k`, restricted to surviving paths, is
//! carried forward on composite Gauss–Legendre nodes covering the region below
//! `B(t_k)` (and above the lower curve); mass beyond a boundary counts as
//! crossed. Each step multiplies the Gaussian transition by the probability that
//! the bridge between two nodes stays inside.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{OneSidedProblem, TwoSidedProblem};
use crate::bridge::{bridge_cross_one_sided, bridge_cross_two_sided, one_sided_from_distances, strip_cross, SeriesControl};
use crate::error::{Error, Result};
use crate::estimate::{Estimate, Method};
use crate::normal::{gaussian_pdf, normal_cdf};
use crate::quadrature::composite_gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalMethod {
    /// Explicit conditional of the problem reduced on each subinterval.
    LocalExplicit,
    /// Bridge formula against the boundary secant on each subinterval.
    PiecewiseLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitControl {
    pub n_splits: usize,
    /// Gauss–Legendre nodes per panel; panels are at most `√Δt` wide.
    pub n_nodes: usize,
    pub local_method: LocalMethod,
    /// Nodes at split time `t` cover at most `±tail_z·√t`.
    pub tail_z: f64,
}

impl Default for SplitControl {
    fn default() -> Self {
        SplitControl {
            n_splits: 8,
            n_nodes: 32,
            local_method: LocalMethod::PiecewiseLinear,
            tail_z: 8.0,
        }
    }
}

impl SplitControl {
    pub fn new(n_splits: usize, local_method: LocalMethod) -> Self {
        SplitControl {
            n_splits,
            local_method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_splits == 0 {
            return Err(Error::InvalidControl("split.n_splits must be at least 1".into()));
        }
        if self.n_nodes < 8 {
            return Err(Error::InvalidControl("split.n_nodes must be at least 8".into()));
        }
        if !(self.tail_z >= 4.0) {
            return Err(Error::InvalidControl("split.tail_z must be at least 4".into()));
        }
        Ok(())
    }
}

/// Boundaries in W-coordinates at the split times.
struct Frame {
    times: Vec<f64>,
    upper: Vec<f64>,
    lower: Option<Vec<f64>>,
}

impl Frame {
    fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// Probability that the bridge from `x0` at split `k − 1` to `x1` at split `k`
/// stays inside.
fn kernel(frame: &Frame, k: usize, x0: f64, x1: f64, method: LocalMethod, series: &SeriesControl) -> Result<f64> {
    let dt = frame.dt();
    let (b0, b1) = (frame.upper[k - 1], frame.upper[k]);
    let cross = match (&frame.lower, method) {
        (None, LocalMethod::PiecewiseLinear) => one_sided_from_distances(b0 - x0, b1 - x1, dt),
        (Some(lower), LocalMethod::PiecewiseLinear) => {
            strip_cross(b0 - x0, x0 - lower[k - 1], b1 - x1, x1 - lower[k], dt, series).value
        }
        // Reduced on the subinterval: Y = W − x0 + u_loc with u_loc(s) = −(B(t_{k−1} + s) − b0)
        // against level b0 − x0, ending at (x1 − x0) − (b1 − b0).
        (None, LocalMethod::LocalExplicit) => bridge_cross_one_sided(b0 - x0, dt, (x1 - x0) - (b1 - b0))?,
        (Some(lower), LocalMethod::LocalExplicit) => {
            let c0 = lower[k - 1] - x0;
            let slope = ((lower[k] - b1) - (lower[k - 1] - b0)) / dt;
            bridge_cross_two_sided(b0 - x0, c0, slope, dt, (x1 - x0) - (b1 - b0), series)?.value
        }
    };
    Ok(1.0 - cross)
}

/// Survival probability with `nodes_per_panel` Gauss–Legendre nodes per panel,
/// and the largest node count used at an interface.
fn survival(frame: &Frame, ctrl: &SplitControl, nodes_per_panel: usize, series: &SeriesControl) -> Result<(f64, usize)> {
    let dt = frame.dt();
    let panel = dt.sqrt();
    // (node, mass) pairs; the process starts at 0 with mass 1
    let mut state: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    let mut widest = 1;
    for k in 1..frame.times.len() {
        let spread = ctrl.tail_z * frame.times[k].sqrt();
        let hi = frame.upper[k].min(spread);
        let lo = match &frame.lower {
            Some(lower) => lower[k].max(-spread),
            None => -spread,
        };
        if hi <= lo {
            return Ok((0.0, widest));
        }
        let (xs, ws) = composite_gauss_legendre(nodes_per_panel, lo, hi, panel);
        widest = widest.max(xs.len());
        let next: Result<Vec<(f64, f64)>> = xs
            .par_iter()
            .zip(ws.par_iter())
            .map(|(&x1, &w1)| {
                let mut density = 0.0;
                for &(x0, mass) in &state {
                    if mass == 0.0 {
                        continue;
                    }
                    let p = gaussian_pdf(x1 - x0, dt);
                    if p == 0.0 {
                        continue;
                    }
                    density += mass * p * kernel(frame, k, x0, x1, ctrl.local_method, series)?;
                }
                Ok((x1, w1 * density))
            })
            .collect();
        state = next?;
    }
    Ok((state.iter().map(|(_, m)| m).sum(), widest))
}

fn run(frame: Frame, ctrl: &SplitControl) -> Result<Estimate> {
    ctrl.validate()?;
    let series = SeriesControl::default();
    let (coarse, _) = survival(&frame, ctrl, ctrl.n_nodes, &series)?;
    let (fine, widest) = survival(&frame, ctrl, 2 * ctrl.n_nodes, &series)?;
    let node_error = (fine - coarse).abs();
    let tail_bound = 2.0 * ctrl.n_splits as f64 * normal_cdf(-ctrl.tail_z);
    Ok(Estimate::clamped(1.0 - fine, node_error + tail_bound, Method::Timesplit)
        .with("n_splits", ctrl.n_splits as f64)
        .with("n_nodes", ctrl.n_nodes as f64)
        .with("node_error", node_error)
        .with("tail_bound", tail_bound)
        .with("interface_nodes", widest as f64))
}

fn split_times(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| horizon * k as f64 / n as f64).collect()
}

/// One-sided crossing probability by time splitting.
///
/// In piecewise-linear mode with split times at the knots of a piecewise-linear
/// boundary the result is exact up to node quadrature. In corrected form the
/// local explicit kernel coincides with the secant kernel.
pub fn split_marginal(problem: &OneSidedProblem, ctrl: &SplitControl) -> Result<Estimate> {
    problem.validate()?;
    ctrl.validate()?;
    let times = split_times(problem.horizon, ctrl.n_splits);
    let upper = times
        .iter()
        .map(|&t| (problem.boundary.eval(t) - problem.drift.eval(t)) / problem.sigma)
        .collect();
    run(Frame { times, upper, lower: None }, ctrl)
}

/// Two-sided crossing probability by time splitting.
pub fn split_marginal_two_sided(problem: &TwoSidedProblem, ctrl: &SplitControl) -> Result<Estimate> {
    problem.validate()?;
    ctrl.validate()?;
    let times = split_times(problem.horizon, ctrl.n_splits);
    let gap = |c: &crate::boundary::BoundaryCurve, t: f64| (c.eval(t) - problem.drift.eval(t)) / problem.sigma;
    let upper = times.iter().map(|&t| gap(&problem.upper, t)).collect();
    let lower = times.iter().map(|&t| gap(&problem.lower, t)).collect();
    run(Frame { times, upper, lower: Some(lower) }, ctrl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::BoundaryCurve;
    use crate::bridge::linear_one_sided_marginal;

    fn one_sided(boundary: BoundaryCurve) -> OneSidedProblem {
        OneSidedProblem::new(BoundaryCurve::constant(0.0), 1.0, boundary, 1.0)
    }

    #[test]
    fn linear_boundary_single_split() {
        let oracle = linear_one_sided_marginal(1.0, 1.0, 1.0).unwrap();
        for method in [LocalMethod::PiecewiseLinear, LocalMethod::LocalExplicit] {
            let e = split_marginal(&one_sided(BoundaryCurve::linear(1.0, 1.0)), &SplitControl::new(1, method)).unwrap();
            assert!((e.value - oracle).abs() < 1e-6, "{method:?}: {}", e.value);
        }
    }

    #[test]
    fn constant_boundary_is_split_invariant() {
        let oracle = 2.0 * normal_cdf(-1.0);
        for n in [1, 2, 4, 8] {
            let e = split_marginal(&one_sided(BoundaryCurve::constant(1.0)), &SplitControl::new(n, LocalMethod::PiecewiseLinear)).unwrap();
            assert!((e.value - oracle).abs() < 1e-6, "n={n}: {}", e.value);
        }
    }

    #[test]
    fn local_explicit_matches_secant_kernel() {
        let p = one_sided(BoundaryCurve::polynomial(vec![1.0, 0.0, 1.0]));
        let a = split_marginal(&p, &SplitControl::new(4, LocalMethod::PiecewiseLinear)).unwrap();
        let b = split_marginal(&p, &SplitControl::new(4, LocalMethod::LocalExplicit)).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn piecewise_linear_boundary_is_exact_at_knots() {
        let knots = BoundaryCurve::piecewise_linear(vec![0.0, 0.5, 1.0], vec![1.0, 1.5, 1.2]).unwrap();
        let p = one_sided(knots);
        let two = split_marginal(&p, &SplitControl::new(2, LocalMethod::PiecewiseLinear)).unwrap();
        let four = split_marginal(&p, &SplitControl::new(4, LocalMethod::PiecewiseLinear)).unwrap();
        assert!((two.value - four.value).abs() < 1e-8);
    }

    #[test]
    fn distant_lower_boundary_is_one_sided() {
        let ctrl = SplitControl::new(4, LocalMethod::PiecewiseLinear);
        let two = TwoSidedProblem::new(
            BoundaryCurve::constant(0.0),
            1.0,
            BoundaryCurve::polynomial(vec![1.0, 0.0, 1.0]),
            BoundaryCurve::polynomial(vec![-40.0, 0.0, 1.0]),
            0.0,
            1.0,
        );
        let one = split_marginal(&one_sided(BoundaryCurve::polynomial(vec![1.0, 0.0, 1.0])), &ctrl).unwrap();
        let e = split_marginal_two_sided(&two, &ctrl).unwrap();
        assert!((e.value - one.value).abs() < 1e-8);
    }

    #[test]
    fn control_validation() {
        assert!(SplitControl::new(0, LocalMethod::PiecewiseLinear).validate().is_err());
        assert!(SplitControl { n_nodes: 7, ..Default::default() }.validate().is_err());
    }
}
