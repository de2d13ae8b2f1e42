//! Boundary curves, problem definitions and the reduction to a constant level.
//!
//! A one-sided problem `Z = μ + σW` against `g` is reduced to `Y = u + W`
//! against the constant level `b = (g(0) − μ(0))/σ`, where
//! `u(t) = (μ(t) − μ(0) − g(t) + g(0))/σ`. Two-sided problems whose boundary
//! deviations differ by a linear term `βt` reduce to the same `Y` against `b`
//! and the line `c(t) = (L(0) − μ(0) + βt)/σ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::trapezoid;

/// Default number of grid nodes used for `u` and `θ`.
pub const DEFAULT_GRID_SIZE: usize = 512;

/// Shape of a boundary or drift curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCurve {
    Constant {
        level: f64,
    },
    Linear {
        intercept: f64,
        slope: f64,
    },
    /// `Σ coefficients[k] t^k`
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// `offset + amplitude · sin(angular_frequency · t + phase)`
    Sinusoid {
        amplitude: f64,
        angular_frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    PiecewiseLinear {
        times: Vec<f64>,
        values: Vec<f64>,
    },
    SampledGrid {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl BoundaryCurve {
    pub fn constant(level: f64) -> Self {
        BoundaryCurve::Constant { level }
    }

    pub fn linear(intercept: f64, slope: f64) -> Self {
        BoundaryCurve::Linear { intercept, slope }
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        BoundaryCurve::Polynomial { coefficients }
    }

    pub fn sinusoid(amplitude: f64, angular_frequency: f64, phase: f64, offset: f64) -> Self {
        BoundaryCurve::Sinusoid {
            amplitude,
            angular_frequency,
            phase,
            offset,
        }
    }

    pub fn piecewise_linear(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_knots(&times, &values)?;
        Ok(BoundaryCurve::PiecewiseLinear { times, values })
    }

    pub fn sampled_grid(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_knots(&times, &values)?;
        Ok(BoundaryCurve::SampledGrid { times, values })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            BoundaryCurve::Constant { .. } => "constant",
            BoundaryCurve::Linear { .. } => "linear",
            BoundaryCurve::Polynomial { .. } => "polynomial",
            BoundaryCurve::Sinusoid { .. } => "sinusoid",
            BoundaryCurve::PiecewiseLinear { .. } => "piecewise_linear",
            BoundaryCurve::SampledGrid { .. } => "sampled_grid",
        }
    }

    /// Whether [`BoundaryCurve::derivative`] returns a value.
    pub fn derivative_available(&self) -> bool {
        !matches!(
            self,
            BoundaryCurve::PiecewiseLinear { .. } | BoundaryCurve::SampledGrid { .. }
        )
    }

    /// Evaluates the curve. Knot-based curves are held flat outside their knots.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            BoundaryCurve::Constant { level } => *level,
            BoundaryCurve::Linear { intercept, slope } => intercept + slope * t,
            BoundaryCurve::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            BoundaryCurve::Sinusoid {
                amplitude,
                angular_frequency,
                phase,
                offset,
            } => offset + amplitude * (angular_frequency * t + phase).sin(),
            BoundaryCurve::PiecewiseLinear { times, values }
            | BoundaryCurve::SampledGrid { times, values } => interpolate(times, values, t),
        }
    }

    pub fn derivative(&self, t: f64) -> Option<f64> {
        match self {
            BoundaryCurve::Constant { .. } => Some(0.0),
            BoundaryCurve::Linear { slope, .. } => Some(*slope),
            BoundaryCurve::Polynomial { coefficients } => Some(
                coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c),
            ),
            BoundaryCurve::Sinusoid {
                amplitude,
                angular_frequency,
                phase,
                ..
            } => Some(amplitude * angular_frequency * (angular_frequency * t + phase).cos()),
            BoundaryCurve::PiecewiseLinear { .. } | BoundaryCurve::SampledGrid { .. } => None,
        }
    }

    /// Checks parameters and that the curve is defined on `[0, horizon]`.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            BoundaryCurve::Constant { level } if !level.is_finite() => {
                Err(Error::InvalidCurve("constant level must be finite".into()))
            }
            BoundaryCurve::Linear { intercept, slope }
                if !(intercept.is_finite() && slope.is_finite()) =>
            {
                Err(Error::InvalidCurve("linear parameters must be finite".into()))
            }
            BoundaryCurve::Polynomial { coefficients } if !finite(coefficients) => {
                Err(Error::InvalidCurve("polynomial coefficients must be finite".into()))
            }
            BoundaryCurve::Sinusoid {
                amplitude,
                angular_frequency,
                phase,
                offset,
            } if !finite(&[*amplitude, *angular_frequency, *phase, *offset]) => {
                Err(Error::InvalidCurve("sinusoid parameters must be finite".into()))
            }
            BoundaryCurve::PiecewiseLinear { times, values }
            | BoundaryCurve::SampledGrid { times, values } => {
                check_knots(times, values)?;
                let (first, last) = (times[0], times[times.len() - 1]);
                if first > 0.0 || last < horizon {
                    return Err(Error::CurveDomain {
                        first,
                        last,
                        horizon,
                    });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn check_knots(times: &[f64], values: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::InvalidCurve("need at least two knots".into()));
    }
    if times.len() != values.len() {
        return Err(Error::InvalidCurve(format!(
            "{} knot times but {} values",
            times.len(),
            values.len()
        )));
    }
    if times.iter().chain(values).any(|x| !x.is_finite()) {
        return Err(Error::InvalidCurve("knots must be finite".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidCurve(
            "knot times must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let n = times.len();
    if t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let k = times.partition_point(|&s| s <= t) - 1;
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    values[k] + w * (values[k + 1] - values[k])
}

/// Uniform time grid `t_i = i · horizon / (nodes − 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub horizon: f64,
    pub nodes: usize,
}

impl Grid {
    pub fn new(horizon: f64, nodes: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidHorizon(horizon));
        }
        if nodes < 2 {
            return Err(Error::GridTooSmall(nodes));
        }
        Ok(Grid { horizon, nodes })
    }

    pub fn step(&self) -> f64 {
        self.horizon / (self.nodes - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.horizon
        } else {
            i as f64 * self.step()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nodes).map(|i| self.time(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSidedProblem {
    pub drift: BoundaryCurve,
    pub sigma: f64,
    pub boundary: BoundaryCurve,
    pub horizon: f64,
    pub grid_size: usize,
}

impl OneSidedProblem {
    pub fn new(
        drift: BoundaryCurve,
        sigma: f64,
        boundary: BoundaryCurve,
        horizon: f64,
    ) -> Self {
        OneSidedProblem {
            drift,
            sigma,
            boundary,
            horizon,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }

    pub fn with_grid_size(mut self, grid_size: usize) -> Self {
        self.grid_size = grid_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::SigmaNonpositive(self.sigma));
        }
        let grid = Grid::new(self.horizon, self.grid_size)?;
        self.drift.validate(self.horizon)?;
        self.boundary.validate(self.horizon)?;
        check_finite_on(&self.drift, "drift", &grid)?;
        check_finite_on(&self.boundary, "boundary", &grid)?;
        let (start, level) = (self.drift.eval(0.0), self.boundary.eval(0.0));
        if start >= level {
            return Err(Error::StartOnOrAboveBoundary {
                start,
                boundary: level,
            });
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.horizon, self.grid_size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedProblem {
    pub drift: BoundaryCurve,
    pub sigma: f64,
    pub upper: BoundaryCurve,
    pub lower: BoundaryCurve,
    /// Slope relating the deviations: `L(t) − L(0) = U(t) − U(0) + βt`.
    pub beta: f64,
    pub horizon: f64,
    pub grid_size: usize,
}

impl TwoSidedProblem {
    pub fn new(
        drift: BoundaryCurve,
        sigma: f64,
        upper: BoundaryCurve,
        lower: BoundaryCurve,
        beta: f64,
        horizon: f64,
    ) -> Self {
        TwoSidedProblem {
            drift,
            sigma,
            upper,
            lower,
            beta,
            horizon,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }

    pub fn with_grid_size(mut self, grid_size: usize) -> Self {
        self.grid_size = grid_size;
        self
    }

    /// Tolerance applied to the β-restriction check.
    pub fn beta_tolerance(&self) -> f64 {
        1e-9 * (1.0 + self.beta.abs() * self.horizon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::SigmaNonpositive(self.sigma));
        }
        if !self.beta.is_finite() {
            return Err(Error::InvalidCurve("beta must be finite".into()));
        }
        let grid = Grid::new(self.horizon, self.grid_size)?;
        self.drift.validate(self.horizon)?;
        self.upper.validate(self.horizon)?;
        self.lower.validate(self.horizon)?;
        check_finite_on(&self.drift, "drift", &grid)?;
        check_finite_on(&self.upper, "upper boundary", &grid)?;
        check_finite_on(&self.lower, "lower boundary", &grid)?;
        let (lower, start, upper) = (
            self.lower.eval(0.0),
            self.drift.eval(0.0),
            self.upper.eval(0.0),
        );
        if !(lower < start && start < upper) {
            return Err(Error::OrderingViolated {
                lower,
                start,
                upper,
            });
        }
        let tol = self.beta_tolerance();
        for t in grid.times() {
            let deviation = (self.lower.eval(t) - lower)
                - (self.upper.eval(t) - upper)
                - self.beta * t;
            if deviation.abs() > tol {
                return Err(Error::BetaRestrictionViolated { t, deviation, tol });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.horizon, self.grid_size)
    }
}

fn check_finite_on(curve: &BoundaryCurve, what: &'static str, grid: &Grid) -> Result<()> {
    for t in grid.times() {
        if !curve.eval(t).is_finite() {
            return Err(Error::NonfiniteCurve { what, t });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    OneSided,
    TwoSided,
}

/// Lower line `c(t) = intercept + slope · t` of a reduced two-sided problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerLine {
    pub intercept: f64,
    pub slope: f64,
}

impl LowerLine {
    pub fn at(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

/// Standardized problem: `Y = u + W` against level `b` (and line `c`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    pub level: f64,
    pub lower: Option<LowerLine>,
    pub grid: Grid,
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
    pub already_constant: bool,
}

impl ReducedProblem {
    /// Builds a reduced problem from sampled `θ`, integrating `u` by cumulative trapezoid.
    pub fn from_theta(
        level: f64,
        lower: Option<LowerLine>,
        horizon: f64,
        theta: Vec<f64>,
    ) -> Result<Self> {
        let grid = Grid::new(horizon, theta.len())?;
        let h = grid.step();
        let mut u = Vec::with_capacity(theta.len());
        u.push(0.0);
        for w in theta.windows(2) {
            let last = *u.last().unwrap();
            u.push(last + 0.5 * h * (w[0] + w[1]));
        }
        Self::assemble(level, lower, grid, u, theta)
    }

    /// Builds a reduced problem from sampled `u` and `θ` on a shared grid.
    pub fn from_samples(
        level: f64,
        lower: Option<LowerLine>,
        horizon: f64,
        u: Vec<f64>,
        theta: Vec<f64>,
    ) -> Result<Self> {
        if u.len() != theta.len() {
            return Err(Error::GridMismatch {
                expected: u.len(),
                got: theta.len(),
            });
        }
        let grid = Grid::new(horizon, u.len())?;
        Self::assemble(level, lower, grid, u, theta)
    }

    /// A problem with `u ≡ 0`: plain Brownian motion against the given levels.
    pub fn constant(level: f64, lower: Option<LowerLine>, horizon: f64, nodes: usize) -> Result<Self> {
        Self::from_theta(level, lower, horizon, vec![0.0; nodes])
    }

    fn assemble(
        level: f64,
        lower: Option<LowerLine>,
        grid: Grid,
        u: Vec<f64>,
        theta: Vec<f64>,
    ) -> Result<Self> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::InvalidLevel(level));
        }
        if let Some(line) = lower {
            if !(line.intercept < 0.0 && line.slope.is_finite()) {
                return Err(Error::OrderingViolated {
                    lower: line.intercept,
                    start: 0.0,
                    upper: level,
                });
            }
            if line.at(grid.horizon) >= level {
                let t = (level - line.intercept) / line.slope;
                return Err(Error::BoundariesCross { t });
            }
        }
        for (i, (&a, &b)) in u.iter().zip(&theta).enumerate() {
            if !a.is_finite() {
                return Err(Error::NonfiniteCurve {
                    what: "u",
                    t: grid.time(i),
                });
            }
            if !b.is_finite() {
                return Err(Error::NonfiniteDerivative { index: i });
            }
        }
        let max_u = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Ok(ReducedProblem {
            level,
            lower,
            grid,
            already_constant: max_u <= 1e-12 * (1.0 + level.abs()),
            u,
            theta,
        })
    }

    pub fn side(&self) -> Side {
        if self.lower.is_some() {
            Side::TwoSided
        } else {
            Side::OneSided
        }
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon
    }

    pub fn u_end(&self) -> f64 {
        *self.u.last().unwrap()
    }

    /// `u(t)` by linear interpolation of the grid samples.
    pub fn u_at(&self, t: f64) -> f64 {
        let h = self.grid.step();
        let n = self.u.len();
        if t <= 0.0 {
            return self.u[0];
        }
        if t >= self.grid.horizon {
            return self.u[n - 1];
        }
        let k = ((t / h) as usize).min(n - 2);
        let w = (t - k as f64 * h) / h;
        self.u[k] + w * (self.u[k + 1] - self.u[k])
    }

    /// Copy with a different constant level; the lower line is kept.
    pub fn with_level(&self, level: f64) -> Result<Self> {
        Self::assemble(
            level,
            self.lower,
            self.grid,
            self.u.clone(),
            self.theta.clone(),
        )
    }
}

/// Reduces `Z = μ + σW` against `g` to `Y = u + W` against a constant level.
pub fn reduce_one_sided(problem: &OneSidedProblem) -> Result<ReducedProblem> {
    problem.validate()?;
    let grid = problem.grid()?;
    let sigma = problem.sigma;
    let (mu0, g0) = (problem.drift.eval(0.0), problem.boundary.eval(0.0));
    let level = (g0 - mu0) / sigma;
    let u = shift_samples(&problem.drift, &problem.boundary, sigma, &grid);
    let theta = theta_for(&problem.drift, &problem.boundary, sigma, &u, &grid)?;
    ReducedProblem::assemble(level, None, grid, u, theta)
}

/// Reduces a two-sided problem to `Y = u + W` between the line `c` and the level `b`.
///
/// `Z` crosses `U` exactly when `Y` crosses `b`, and crosses `L` exactly when `Y`
/// crosses `c(t) = (L(0) − μ(0) + βt)/σ`.
pub fn reduce_two_sided(problem: &TwoSidedProblem) -> Result<ReducedProblem> {
    problem.validate()?;
    let grid = problem.grid()?;
    let sigma = problem.sigma;
    let (mu0, u0, l0) = (
        problem.drift.eval(0.0),
        problem.upper.eval(0.0),
        problem.lower.eval(0.0),
    );
    let level = (u0 - mu0) / sigma;
    let lower = LowerLine {
        intercept: (l0 - mu0) / sigma,
        slope: problem.beta / sigma,
    };
    let u = shift_samples(&problem.drift, &problem.upper, sigma, &grid);
    let theta = theta_for(&problem.drift, &problem.upper, sigma, &u, &grid)?;
    ReducedProblem::assemble(level, Some(lower), grid, u, theta)
}

fn shift_samples(drift: &BoundaryCurve, boundary: &BoundaryCurve, sigma: f64, grid: &Grid) -> Vec<f64> {
    let (mu0, g0) = (drift.eval(0.0), boundary.eval(0.0));
    let mut u: Vec<f64> = grid
        .times()
        .map(|t| ((drift.eval(t) - mu0) - (boundary.eval(t) - g0)) / sigma)
        .collect();
    u[0] = 0.0;
    u
}

fn theta_for(
    drift: &BoundaryCurve,
    boundary: &BoundaryCurve,
    sigma: f64,
    u: &[f64],
    grid: &Grid,
) -> Result<Vec<f64>> {
    if drift.derivative_available() && boundary.derivative_available() {
        let analytic = |t: f64| {
            (drift.derivative(t).unwrap_or(f64::NAN) - boundary.derivative(t).unwrap_or(f64::NAN))
                / sigma
        };
        sample_theta(u, grid.horizon, Some(&analytic))
    } else {
        sample_theta(u, grid.horizon, None)
    }
}

/// Samples `θ = u'` on the grid of `u`.
///
/// Uses the analytic derivative when given; otherwise central differences in the
/// interior and second-order one-sided differences at the ends.
pub fn sample_theta(
    u: &[f64],
    horizon: f64,
    analytic: Option<&dyn Fn(f64) -> f64>,
) -> Result<Vec<f64>> {
    let grid = Grid::new(horizon, u.len())?;
    let n = u.len();
    let theta: Vec<f64> = match analytic {
        Some(f) => grid.times().map(f).collect(),
        None => {
            let h = grid.step();
            (0..n)
                .map(|i| {
                    if n == 2 {
                        (u[1] - u[0]) / h
                    } else if i == 0 {
                        (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
                    } else if i == n - 1 {
                        (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h)
                    } else {
                        (u[i + 1] - u[i - 1]) / (2.0 * h)
                    }
                })
                .collect()
        }
    };
    if let Some(index) = theta.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonfiniteDerivative { index });
    }
    Ok(theta)
}

/// Outcome of the integrability check on `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NovikovReport {
    /// `∫θ²` by trapezoid.
    pub i2: f64,
    pub passed: bool,
    /// `u ≡ 0`: the change of measure is not needed.
    pub degenerate: bool,
}

pub fn validate_novikov(reduced: &ReducedProblem) -> NovikovReport {
    let squares: Vec<f64> = reduced.theta.iter().map(|t| t * t).collect();
    let i2 = trapezoid(&squares, reduced.grid.step());
    let degenerate = reduced.already_constant || reduced.theta.iter().all(|&t| t == 0.0);
    NovikovReport {
        i2,
        passed: i2.is_finite(),
        degenerate,
    }
}
