//! Monte Carlo oracles: path simulation with bridge-corrected crossing,
//! importance sampling under the engine's Q, conditional bridge sampling, and
//! statistical checks of the endpoint decomposition.
//!
//! Every path draws its normals from a fixed position of a ChaCha8 stream keyed
//! by `(seed, domain)`, so estimates do not depend on the thread schedule.
//! Chunks are reduced in index order.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{LowerLine, OneSidedProblem, ReducedProblem, TwoSidedProblem};
use crate::bridge::{strip_cross, SeriesControl};
use crate::error::{Error, Result};
use crate::estimate::{Estimate, Method};
use crate::estimators::Mode;
use crate::girsanov::{step_averages, Direction, GirsanovCoefficients};
use crate::normal::inverse_normal_cdf;
use crate::quadrature::trapezoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MCControl {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Pair each path with its reflection; standard errors are taken over pairs.
    pub antithetic: bool,
}

impl Default for MCControl {
    fn default() -> Self {
        MCControl {
            n_paths: 100_000,
            n_steps: 512,
            seed: 0,
            antithetic: true,
        }
    }
}

impl MCControl {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        MCControl {
            n_paths,
            n_steps,
            seed,
            antithetic: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 100 {
            return Err(Error::InvalidControl("mc.n_paths must be at least 100".into()));
        }
        if self.n_steps < 16 {
            return Err(Error::InvalidControl("mc.n_steps must be at least 16".into()));
        }
        Ok(())
    }

    /// Independent control for the `index`-th sub-computation.
    pub fn substream(&self, index: u64) -> Self {
        MCControl {
            seed: mix(self.seed, index.wrapping_add(0x5EED)),
            ..*self
        }
    }
}

// stream domains
const PATH_ONE: u64 = 1;
const PATH_TWO: u64 = 2;
const IMPORTANCE: u64 = 3;
const Q_BRIDGE: u64 = 4;
const DECOMPOSITION: u64 = 5;
const P_BRIDGE: u64 = 6;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(seed: u64, domain: u64) -> u64 {
    splitmix(seed ^ splitmix(domain))
}

const CHUNK: usize = 256;

/// Running sums, cross products and absolute maxima of a vector statistic.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Moments<const K: usize> {
    pub n: usize,
    sum: [f64; K],
    cross: [[f64; K]; K],
    max_abs: [f64; K],
}

impl<const K: usize> Moments<K> {
    fn new() -> Self {
        Moments {
            n: 0,
            sum: [0.0; K],
            cross: [[0.0; K]; K],
            max_abs: [0.0; K],
        }
    }

    fn push(&mut self, v: &[f64; K]) {
        self.n += 1;
        for i in 0..K {
            self.sum[i] += v[i];
            self.max_abs[i] = self.max_abs[i].max(v[i].abs());
            for j in i..K {
                self.cross[i][j] += v[i] * v[j];
            }
        }
    }

    fn merge(&mut self, other: &Self) {
        self.n += other.n;
        for i in 0..K {
            self.sum[i] += other.sum[i];
            self.max_abs[i] = self.max_abs[i].max(other.max_abs[i]);
            for j in i..K {
                self.cross[i][j] += other.cross[i][j];
            }
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i] / self.n as f64
    }

    /// Unbiased sample covariance.
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let n = self.n as f64;
        ((self.cross[i][j] - self.sum[i] * self.sum[j] / n) / (n - 1.0)).max(if i == j {
            0.0
        } else {
            f64::NEG_INFINITY
        })
    }

    pub fn var(&self, i: usize) -> f64 {
        self.cov(i, i)
    }

    pub fn se(&self, i: usize) -> f64 {
        (self.var(i) / self.n as f64).sqrt()
    }

    pub fn max_abs(&self, i: usize) -> f64 {
        self.max_abs[i]
    }
}

#[inline]
fn next_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    inverse_normal_cdf(u)
}

/// Runs `f` over `n_paths` paths of `n_steps` standard normals each.
///
/// `f` receives the path index, the normals and a scratch buffer. With
/// `antithetic`, unit `k` evaluates paths `2k` and `2k + 1` on `z` and `−z` and
/// records their average.
pub(crate) fn simulate<const K: usize, F>(
    mc: &MCControl,
    domain: u64,
    antithetic: bool,
    f: F,
) -> Result<Moments<K>>
where
    F: Fn(usize, &[f64], &mut Vec<f64>) -> Result<[f64; K]> + Sync,
{
    mc.validate()?;
    let units = if antithetic {
        mc.n_paths.div_ceil(2)
    } else {
        mc.n_paths
    };
    let steps = mc.n_steps;
    let key = mix(mc.seed, domain);
    let chunks = units.div_ceil(CHUNK);
    let partials: Vec<Result<Moments<K>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (start, end) = (c * CHUNK, ((c + 1) * CHUNK).min(units));
            let mut rng = ChaCha8Rng::seed_from_u64(key);
            // two 32-bit words per normal
            rng.set_word_pos(2 * (start as u128) * (steps as u128));
            let mut z = vec![0.0; steps];
            let mut scratch = Vec::with_capacity(steps + 1);
            let mut m = Moments::<K>::new();
            for unit in start..end {
                z.iter_mut().for_each(|v| *v = next_normal(&mut rng));
                if antithetic {
                    let a = f(2 * unit, &z, &mut scratch)?;
                    z.iter_mut().for_each(|v| *v = -*v);
                    let b = f(2 * unit + 1, &z, &mut scratch)?;
                    let mut avg = [0.0; K];
                    for i in 0..K {
                        avg[i] = 0.5 * (a[i] + b[i]);
                    }
                    m.push(&avg);
                } else {
                    m.push(&f(unit, &z, &mut scratch)?);
                }
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::<K>::new();
    for p in partials {
        total.merge(&p?);
    }
    Ok(total)
}

fn paths_used(mc: &MCControl) -> f64 {
    if mc.antithetic {
        (2 * mc.n_paths.div_ceil(2)) as f64
    } else {
        mc.n_paths as f64
    }
}

/// Per-step series truncation: a step is short, so three images suffice.
const STEP_SERIES: SeriesControl = SeriesControl {
    tol: 1e-300,
    j_max: 3,
};

/// Non-crossing probability of a bridge step against one line, from its
/// start and end distances.
#[inline]
fn step_survival(d0: f64, d1: f64, two_over_dt: f64) -> f64 {
    let expo = -two_over_dt * d0 * d1;
    if expo < -40.0 {
        1.0
    } else {
        1.0 - expo.exp()
    }
}

/// Non-crossing probability of a bridge step between two lines.
#[inline]
fn step_survival_strip(a0: f64, e0: f64, a1: f64, e1: f64, dt: f64) -> f64 {
    let k = 2.0 / dt;
    if k * a0 * a1 > 40.0 && k * e0 * e1 > 40.0 {
        1.0
    } else {
        1.0 - strip_cross(a0, e0, a1, e1, dt, &STEP_SERIES).value
    }
}

/// Crossing probability of `Z = μ + σW` against `g` by simulation.
///
/// Each step adds the exact crossing probability of the Brownian bridge between
/// the grid values against the interpolated boundary; paths average
/// `1 − Π(1 − p_i)`.
pub fn path_mc_one_sided(problem: &OneSidedProblem, mc: &MCControl) -> Result<Estimate> {
    problem.validate()?;
    mc.validate()?;
    let n = mc.n_steps;
    let dt = problem.horizon / n as f64;
    let sigma = problem.sigma;
    let gap: Vec<f64> = (0..=n)
        .map(|i| {
            let t = i as f64 * dt;
            (problem.boundary.eval(t) - problem.drift.eval(t)) / sigma
        })
        .collect();
    let sqrt_dt = dt.sqrt();
    let k = 2.0 / dt;
    let m = simulate::<2, _>(mc, PATH_ONE, mc.antithetic, |_, z, _| {
        let (mut w, mut d_prev) = (0.0, gap[0]);
        let mut survival = 1.0;
        for (i, zi) in z.iter().enumerate() {
            w += zi * sqrt_dt;
            let d = gap[i + 1] - w;
            if d <= 0.0 {
                return Ok([1.0, 1.0]);
            }
            survival *= step_survival(d_prev, d, k);
            d_prev = d;
        }
        Ok([1.0 - survival, 0.0])
    })?;
    Ok(Estimate::clamped(m.mean(0), m.se(0), Method::PathMc)
        .with("grid_indicator_value", m.mean(1))
        .with("grid_indicator_variance", m.var(1))
        .with("survival_product_variance", m.var(0))
        .with("n_paths", paths_used(mc))
        .with("n_steps", n as f64))
}

/// Two-sided counterpart of [`path_mc_one_sided`], with the per-step crossing
/// probability from the two-line bridge series truncated at three images.
pub fn path_mc_two_sided(problem: &TwoSidedProblem, mc: &MCControl) -> Result<Estimate> {
    problem.validate()?;
    mc.validate()?;
    let n = mc.n_steps;
    let dt = problem.horizon / n as f64;
    let sigma = problem.sigma;
    let (upper, lower): (Vec<f64>, Vec<f64>) = (0..=n)
        .map(|i| {
            let t = i as f64 * dt;
            let mu = problem.drift.eval(t);
            ((problem.upper.eval(t) - mu) / sigma, (problem.lower.eval(t) - mu) / sigma)
        })
        .unzip();
    let sqrt_dt = dt.sqrt();
    let m = simulate::<2, _>(mc, PATH_TWO, mc.antithetic, |_, z, _| {
        let mut w = 0.0;
        let (mut a_prev, mut e_prev) = (upper[0], -lower[0]);
        let mut survival = 1.0;
        for (i, zi) in z.iter().enumerate() {
            w += zi * sqrt_dt;
            let (a, e) = (upper[i + 1] - w, w - lower[i + 1]);
            if a <= 0.0 || e <= 0.0 {
                return Ok([1.0, 1.0]);
            }
            survival *= step_survival_strip(a_prev, e_prev, a, e, dt);
            a_prev = a;
            e_prev = e;
        }
        Ok([1.0 - survival, 0.0])
    })?;
    Ok(Estimate::clamped(m.mean(0), m.se(0), Method::PathMc)
        .with("grid_indicator_value", m.mean(1))
        .with("grid_indicator_variance", m.var(1))
        .with("survival_product_variance", m.var(0))
        .with("n_paths", paths_used(mc))
        .with("n_steps", n as f64))
}

/// Coarse and fine runs of [`path_mc_one_sided`], the fine one with half the step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepHalving {
    pub coarse: Estimate,
    pub fine: Estimate,
    /// `|fine − coarse|` over the combined standard error.
    pub sigmas: f64,
}

pub fn step_halving_check(problem: &OneSidedProblem, mc: &MCControl) -> Result<StepHalving> {
    let coarse = path_mc_one_sided(problem, mc)?;
    let fine_ctrl = MCControl {
        n_steps: 2 * mc.n_steps,
        ..mc.substream(1)
    };
    let fine = path_mc_one_sided(problem, &fine_ctrl)?;
    let sigmas = fine.sigmas_from(&coarse);
    Ok(StepHalving {
        coarse,
        fine,
        sigmas,
    })
}

/// Distances of a reduced path to the level and, two-sided, to the lower line.
struct Levels {
    level: f64,
    lower: Option<LowerLine>,
    dt: f64,
}

impl Levels {
    fn new(reduced: &ReducedProblem, steps: usize) -> Self {
        Levels {
            level: reduced.level,
            lower: reduced.lower,
            dt: reduced.horizon() / steps as f64,
        }
    }

    /// Survival of `Y` sampled at the grid nodes (`y[0] = 0`) against the
    /// constant level and the lower line.
    fn survival(&self, y: &[f64]) -> f64 {
        let k = 2.0 / self.dt;
        let mut survival = 1.0;
        let mut a_prev = self.level - y[0];
        let mut e_prev = self.lower.map(|c| y[0] - c.intercept);
        for (i, &yi) in y.iter().enumerate().skip(1) {
            let a = self.level - yi;
            if a <= 0.0 {
                return 0.0;
            }
            match (self.lower, e_prev) {
                (Some(c), Some(ep)) => {
                    let e = yi - c.at(i as f64 * self.dt);
                    if e <= 0.0 {
                        return 0.0;
                    }
                    survival *= step_survival_strip(a_prev, ep, a, e, self.dt);
                    e_prev = Some(e);
                }
                _ => survival *= step_survival(a_prev, a, k),
            }
            a_prev = a;
        }
        survival
    }
}

/// Estimates the crossing probability of `Y = u + W` under P by simulating `Y`
/// as a Q-Wiener process and weighting with the density of `direction`.
///
/// `QToP` is the correct orientation. `PToQ` recovers `W = Y − u` from each
/// path and applies `dQ/dP`, the reciprocal of the correct weight; it is the
/// negative control.
pub fn girsanov_importance_mc(
    reduced: &ReducedProblem,
    coeffs: &GirsanovCoefficients,
    mc: &MCControl,
    direction: Direction,
) -> Result<Estimate> {
    mc.validate()?;
    let n = mc.n_steps;
    let levels = Levels::new(reduced, n);
    let dt = levels.dt;
    let sqrt_dt = dt.sqrt();
    let theta_bar = step_averages(reduced, n);
    let quad_var: f64 = theta_bar.iter().map(|t| t * t).sum::<f64>() * dt;
    let m = simulate::<3, _>(mc, IMPORTANCE, mc.antithetic, |path, z, y| {
        y.clear();
        y.push(0.0);
        let mut stochastic = 0.0;
        for (zi, th) in z.iter().zip(&theta_bar) {
            let dy = zi * sqrt_dt;
            stochastic += th * dy;
            let last = *y.last().unwrap();
            y.push(last + dy);
        }
        let log_weight = match direction {
            Direction::QToP => stochastic - 0.5 * quad_var,
            // −Σθ̄ΔW − ½Σθ̄²Δt with ΔW = ΔY − θ̄Δt
            Direction::PToQ => -stochastic + 0.5 * quad_var,
        };
        if log_weight.abs() > 700.0 {
            return Err(Error::WeightOverflow { path, log_weight });
        }
        let w = log_weight.exp();
        Ok([w * (1.0 - levels.survival(y)), w, *y.last().unwrap()])
    })?;
    let (mean_w, second_w) = (m.mean(1), m.var(1) + m.mean(1).powi(2));
    Ok(Estimate::clamped(m.mean(0), m.se(0), Method::ImportanceMc)
        .with("mean_weight", mean_w)
        .with("effective_sample_size", m.n as f64 * mean_w * mean_w / second_w)
        .with("y_end_mean", m.mean(2))
        .with("y_end_se", m.se(2))
        .with("alpha", coeffs.alpha)
        .with("alpha_tilde", coeffs.alpha_tilde)
        .with("rho", coeffs.rho)
        .with("n_paths", paths_used(mc))
        .with("n_steps", n as f64))
}

/// Samples of `(1·w, 1, e^{ᾱW̃}, 1·e^{ᾱW̃})` over Q-bridges of `Y` ending at `x + u_T`.
fn q_bridge_moments(
    reduced: &ReducedProblem,
    coeffs: &GirsanovCoefficients,
    x: f64,
    mc: &MCControl,
    mode: Mode,
) -> Result<Moments<4>> {
    let n = mc.n_steps;
    let levels = Levels::new(reduced, n);
    let (dt, horizon) = (levels.dt, reduced.horizon());
    let sqrt_dt = dt.sqrt();
    let y_end = x + reduced.u_end();
    let theta_bar = step_averages(reduced, n);
    let at = coeffs.alpha_tilde;
    let theta_tilde: Vec<f64> = if at > 0.0 {
        theta_bar.iter().map(|t| (t - coeffs.alpha) / at).collect()
    } else {
        Vec::new()
    };
    let log_prefactor = match mode {
        Mode::Corrected => 0.5 * at * at,
        Mode::Literal => -coeffs.alpha * x + 0.5 * coeffs.i2,
    };
    let exponent_sign = match mode {
        Mode::Corrected => 1.0,
        Mode::Literal => -1.0,
    };
    simulate::<4, _>(mc, Q_BRIDGE, mc.antithetic, |_, z, y| {
        y.clear();
        y.push(0.0);
        for zi in z {
            let last = *y.last().unwrap();
            y.push(last + zi * sqrt_dt);
        }
        let pull = y[n] - y_end;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi -= i as f64 * dt / horizon * pull;
        }
        y[n] = y_end;
        let indicator = 1.0 - levels.survival(y);
        let w_tilde: f64 = theta_tilde
            .iter()
            .zip(&theta_bar)
            .zip(y.windows(2))
            .map(|((tt, th), s)| tt * (s[1] - s[0] - th * dt))
            .sum();
        let e = (at * w_tilde).exp();
        let weight = (log_prefactor + exponent_sign * at * w_tilde).exp();
        Ok([indicator * weight, indicator, e, indicator * e])
    })
}

/// Monte Carlo estimate of the inner factor of the hybrid conditional,
/// `prefactor · E_Q[1_cross · e^{±ᾱW̃} | W_T = x]`.
///
/// Corrected mode uses `e^{ᾱ²/2}` and `+ᾱ`; literal mode `e^{−αx + I2/2}` and `−ᾱ`.
pub fn conditional_bridge_mc(
    reduced: &ReducedProblem,
    coeffs: &GirsanovCoefficients,
    x: f64,
    mc: &MCControl,
    mode: Mode,
) -> Result<Estimate> {
    let m = q_bridge_moments(reduced, coeffs, x, mc, mode)?;
    let mut e = Estimate::new(m.mean(0), m.se(0), Method::BridgeMc)
        .with("indicator_mean", m.mean(1))
        .with("exp_weight_mean", m.mean(2))
        .with("x", x);
    e.diagnostics.insert("n_paths".into(), paths_used(mc));
    Ok(e)
}

/// Crossing probability of `Y = u + W` given `W_T = x` under P, by direct
/// simulation of the P-bridge against the moving boundary `b − u_t`.
///
/// Crossing within a step uses one-sided bridge corrections for each line, so
/// the oracle does not share code with the two-line series.
pub fn p_bridge_mc(reduced: &ReducedProblem, x: f64, mc: &MCControl) -> Result<Estimate> {
    mc.validate()?;
    let n = mc.n_steps;
    let horizon = reduced.horizon();
    let dt = horizon / n as f64;
    let sqrt_dt = dt.sqrt();
    let k = 2.0 / dt;
    let u: Vec<f64> = (0..=n).map(|i| reduced.u_at(i as f64 * dt)).collect();
    let (level, lower) = (reduced.level, reduced.lower);
    let m = simulate::<1, _>(mc, P_BRIDGE, mc.antithetic, |_, z, w| {
        w.clear();
        w.push(0.0);
        for zi in z {
            let last = *w.last().unwrap();
            w.push(last + zi * sqrt_dt);
        }
        let pull = w[n] - x;
        let mut survival = 1.0;
        let (mut a_prev, mut e_prev) = (level, lower.map(|c| -c.intercept).unwrap_or(0.0));
        for i in 1..=n {
            let wi = if i == n { x } else { w[i] - i as f64 * dt / horizon * pull };
            let yi = u[i] + wi;
            let a = level - yi;
            if a <= 0.0 {
                return Ok([1.0]);
            }
            survival *= step_survival(a_prev, a, k);
            if let Some(c) = lower {
                let e = yi - c.at(i as f64 * dt);
                if e <= 0.0 {
                    return Ok([1.0]);
                }
                survival *= step_survival(e_prev, e, k);
                e_prev = e;
            }
            a_prev = a;
        }
        Ok([1.0 - survival])
    })?;
    Ok(Estimate::new(m.mean(0), m.se(0), Method::BridgeMc)
        .with("x", x)
        .with("n_paths", paths_used(mc)))
}

/// Crossing probability of a Brownian bridge from 0 to `y` against `level`
/// (and `lower`), by simulation.
pub fn bridge_mc(
    level: f64,
    lower: Option<LowerLine>,
    horizon: f64,
    y: f64,
    mc: &MCControl,
) -> Result<Estimate> {
    let reduced = ReducedProblem::constant(level, lower, horizon, 2)?;
    p_bridge_mc(&reduced, y, mc)
}

/// Empirical check of `W̄_T = αW_T + ᾱW̃` with `W̃` standard normal and
/// independent of `W_T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub n_paths: usize,
    /// `ᾱ = 0`: `W̃` is undefined and the statistics are not computed.
    pub degenerate: bool,
    pub alpha: f64,
    pub alpha_tilde: f64,
    pub i_cross: f64,
    /// `∫θ̃`, `∫θ̃²` and `I_cross − ᾱ` on the reduced grid.
    pub theta_tilde_integral: f64,
    pub theta_tilde_square_integral: f64,
    pub i_cross_minus_alpha_tilde: f64,
    pub max_residual: f64,
    pub mean_w_tilde: f64,
    pub var_w_tilde: f64,
    pub corr_w_end_w_tilde: f64,
    /// Moments of `W̃ + I_cross` on the same increments read as Q-increments of `Y`.
    pub q_mean: f64,
    pub q_var: f64,
    /// Mean of the simulated endpoint, `W_T` under P and `Y_T` under Q.
    pub end_mean: f64,
    /// `3/√n`
    pub mean_band: f64,
    /// `5/√n`
    pub var_band: f64,
    /// `3√(T/n)`
    pub end_mean_band: f64,
}

pub fn decomposition_stats(
    reduced: &ReducedProblem,
    coeffs: &GirsanovCoefficients,
    mc: &MCControl,
) -> Result<DecompositionReport> {
    mc.validate()?;
    let sqrt_n = (mc.n_paths as f64).sqrt();
    let horizon = reduced.horizon();
    let mut report = DecompositionReport {
        n_paths: mc.n_paths,
        degenerate: coeffs.alpha_tilde <= 0.0,
        alpha: coeffs.alpha,
        alpha_tilde: coeffs.alpha_tilde,
        i_cross: coeffs.i_cross,
        theta_tilde_integral: 0.0,
        theta_tilde_square_integral: 0.0,
        i_cross_minus_alpha_tilde: 0.0,
        max_residual: 0.0,
        mean_w_tilde: 0.0,
        var_w_tilde: 0.0,
        corr_w_end_w_tilde: 0.0,
        q_mean: 0.0,
        q_var: 0.0,
        end_mean: 0.0,
        mean_band: 3.0 / sqrt_n,
        var_band: 5.0 / sqrt_n,
        end_mean_band: 3.0 * (horizon / mc.n_paths as f64).sqrt(),
    };
    if report.degenerate {
        return Ok(report);
    }
    let h = reduced.grid.step();
    let tt = &coeffs.theta_tilde;
    report.theta_tilde_integral = trapezoid(tt, h);
    report.theta_tilde_square_integral =
        trapezoid(&tt.iter().map(|v| v * v).collect::<Vec<_>>(), h);
    report.i_cross_minus_alpha_tilde = coeffs.i_cross - coeffs.alpha_tilde;

    let n = mc.n_steps;
    let dt = horizon / n as f64;
    let sqrt_dt = dt.sqrt();
    let (alpha, at) = (coeffs.alpha, coeffs.alpha_tilde);
    let theta_bar = step_averages(reduced, n);
    let theta_tilde: Vec<f64> = theta_bar.iter().map(|t| (t - alpha) / at).collect();
    let shift: f64 = theta_tilde.iter().zip(&theta_bar).map(|(a, b)| a * b).sum::<f64>() * dt;
    let i_cross = coeffs.i_cross;
    let m = simulate::<4, _>(mc, DECOMPOSITION, false, |_, z, _| {
        let (mut w_end, mut w_bar, mut w_tilde) = (0.0, 0.0, 0.0);
        for ((zi, th), tt) in z.iter().zip(&theta_bar).zip(&theta_tilde) {
            let dw = zi * sqrt_dt;
            w_end += dw;
            w_bar += th * dw;
            w_tilde += tt * dw;
        }
        let residual = (w_bar - alpha * w_end - at * w_tilde).abs();
        // read dw as dY under Q: W̃ = Σθ̃(ΔY − θΔt)
        let q = w_tilde - shift + i_cross;
        Ok([w_end, w_tilde, residual, q])
    })?;
    report.max_residual = m.max_abs(2);
    report.mean_w_tilde = m.mean(1);
    report.var_w_tilde = m.var(1);
    report.corr_w_end_w_tilde = m.cov(0, 1) / (m.var(0) * m.var(1)).sqrt();
    report.q_mean = m.mean(3);
    report.q_var = m.var(3);
    report.end_mean = m.mean(0);
    Ok(report)
}

/// `Ê[1·e^{ᾱW̃}|x] − Ê[1|x]·Ê[e^{ᾱW̃}|x]` under Q with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorizationGap {
    pub x: f64,
    pub gap: f64,
    pub se: f64,
    /// Gap divided by `Ê[1]·Ê[e^{ᾱW̃}]`; zero when the indicator mean is zero.
    pub normalized: f64,
    pub indicator_mean: f64,
    pub exp_weight_mean: f64,
}

pub fn factorization_gap(
    reduced: &ReducedProblem,
    coeffs: &GirsanovCoefficients,
    x: f64,
    mc: &MCControl,
) -> Result<FactorizationGap> {
    let m = q_bridge_moments(reduced, coeffs, x, mc, Mode::Corrected)?;
    let (mi, me, mie) = (m.mean(1), m.mean(2), m.mean(3));
    let gap = mie - mi * me;
    // gradient of (m_ie, m_i, m_e) ↦ m_ie − m_i m_e
    let g = [(3, 1.0), (1, -me), (2, -mi)];
    let mut var = 0.0;
    for &(a, ga) in &g {
        for &(b, gb) in &g {
            var += ga * gb * m.cov(a, b);
        }
    }
    let se = (var.max(0.0) / m.n as f64).sqrt();
    let denom = mi * me;
    Ok(FactorizationGap {
        x,
        gap,
        se,
        normalized: if denom > 0.0 { gap / denom } else { 0.0 },
        indicator_mean: mi,
        exp_weight_mean: me,
    })
}
