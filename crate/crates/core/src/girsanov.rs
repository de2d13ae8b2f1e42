//! Change-of-measure coefficients and the decomposition of `W̄_T = ∫θ dW`.
//!
//! Under P, `(W_T, W̄_T)` is a centered Gaussian pair with `Var W_T = T`,
//! `Var W̄_T = I2` and `Cov = I1`. Projecting `W̄_T` on `W_T` gives
//! `W̄_T = α W_T + ᾱ W̃` with `α = I1/T`, `ᾱ² = I2 − I1²/T` and `W̃ = ∫θ̃ dW`
//! standard normal and independent of `W_T`, where `θ̃ = (θ − α)/ᾱ`.
//!
//! The engine's Q is `dQ/dP = exp(−∫θ dW − ½∫θ²)`, under which `Y = u + W`
//! is a standard Wiener process.

use serde::{Deserialize, Serialize};

use crate::boundary::{validate_novikov, ReducedProblem};
use crate::error::{Error, Result};
use crate::quadrature::trapezoid;

#[derive(Debug, Clone, PartialEq)]
pub struct GirsanovCoefficients {
    pub horizon: f64,
    /// `∫θ`
    pub i1: f64,
    /// `∫θ²`
    pub i2: f64,
    pub rho: f64,
    pub alpha: f64,
    pub alpha_tilde: f64,
    /// `θ̃` on the reduced grid; empty when `ᾱ = 0`.
    pub theta_tilde: Vec<f64>,
    /// `∫θ̃θ`, equal to `ᾱ` when `ᾱ > 0`.
    pub i_cross: f64,
    /// Set for `u ≡ 0`, where every coefficient is zero.
    pub degenerate: bool,
}

impl GirsanovCoefficients {
    /// All-zero coefficients for `u ≡ 0`.
    pub fn degenerate(horizon: f64) -> Self {
        GirsanovCoefficients {
            horizon,
            i1: 0.0,
            i2: 0.0,
            rho: 0.0,
            alpha: 0.0,
            alpha_tilde: 0.0,
            theta_tilde: Vec::new(),
            i_cross: 0.0,
            degenerate: true,
        }
    }

    /// Coefficients of `reduced`, or the degenerate set when `u ≡ 0`.
    pub fn resolve(reduced: &ReducedProblem) -> Result<Self> {
        if validate_novikov(reduced).degenerate {
            Ok(Self::degenerate(reduced.horizon()))
        } else {
            compute_coefficients(reduced)
        }
    }
}

pub fn compute_coefficients(reduced: &ReducedProblem) -> Result<GirsanovCoefficients> {
    let report = validate_novikov(reduced);
    if report.degenerate {
        return Err(Error::DegenerateDrift);
    }
    if !report.passed {
        return Err(Error::NonfiniteIntegral);
    }
    let h = reduced.grid.step();
    let horizon = reduced.horizon();
    let theta = &reduced.theta;
    let i1 = trapezoid(theta, h);
    let i2 = report.i2;
    if !i1.is_finite() {
        return Err(Error::NonfiniteIntegral);
    }
    let alpha = i1 / horizon;
    let rho = if i2 > 0.0 {
        (i1 / (horizon.sqrt() * i2.sqrt())).clamp(-1.0, 1.0)
    } else {
        0.0
    };

    let spread = theta.iter().fold(0.0_f64, |m, t| m.max((t - alpha).abs()));
    let (alpha_tilde, theta_tilde, i_cross) = if spread <= 1e-12 * (1.0 + alpha.abs()) {
        (0.0, Vec::new(), 0.0)
    } else {
        // trapezoid of (θ − α)² equals I2 − I1²/T in exact arithmetic and is
        // not subject to cancellation
        let centered: Vec<f64> = theta.iter().map(|t| (t - alpha) * (t - alpha)).collect();
        let alpha_tilde = trapezoid(&centered, h).sqrt();
        let theta_tilde: Vec<f64> = theta.iter().map(|t| (t - alpha) / alpha_tilde).collect();
        let cross: Vec<f64> = theta_tilde.iter().zip(theta).map(|(a, b)| a * b).collect();
        let i_cross = trapezoid(&cross, h);
        (alpha_tilde, theta_tilde, i_cross)
    };
    if !alpha_tilde.is_finite() || !i_cross.is_finite() {
        return Err(Error::NonfiniteIntegral);
    }
    Ok(GirsanovCoefficients {
        horizon,
        i1,
        i2,
        rho,
        alpha,
        alpha_tilde,
        theta_tilde,
        i_cross,
        degenerate: false,
    })
}

/// Recovers `W̃ = (W̄_T − α W_T)/ᾱ`.
pub fn decompose_endpoint(w_end: f64, wbar_end: f64, coeffs: &GirsanovCoefficients) -> Result<f64> {
    if coeffs.alpha_tilde <= 0.0 {
        return Err(Error::AlphaTildeZero);
    }
    Ok((wbar_end - coeffs.alpha * w_end) / coeffs.alpha_tilde)
}

/// Orientation of a density between P and the engine's Q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `log dQ/dP = −Σθ̄ΔW − ½Σθ̄²Δt`, evaluated on a P-Wiener path `W`.
    PToQ,
    /// `log dP/dQ = +Σθ̄ΔY − ½Σθ̄²Δt`, evaluated on a Q-Wiener path `Y`.
    QToP,
}

/// Step averages `θ̄_k = (u(t_{k+1}) − u(t_k))/Δt` on a uniform grid of `steps` steps.
///
/// Path sums use these in place of point values: for a deterministic integrand
/// both converge to the same stochastic integral, and with step averages the
/// discrete change of measure shifts each Gaussian increment by exactly `Δu_k`.
pub fn step_averages(reduced: &ReducedProblem, steps: usize) -> Vec<f64> {
    let horizon = reduced.horizon();
    let dt = horizon / steps as f64;
    let same_grid = steps + 1 == reduced.u.len();
    let u_at = |k: usize| {
        if same_grid {
            reduced.u[k]
        } else if k == steps {
            reduced.u_end()
        } else {
            reduced.u_at(k as f64 * dt)
        }
    };
    (0..steps).map(|k| (u_at(k + 1) - u_at(k)) / dt).collect()
}

/// Log of the density between P and Q along a path sampled on the reduced grid.
///
/// `path` holds the process values at the grid nodes, starting at 0.
pub fn log_radon_nikodym(path: &[f64], reduced: &ReducedProblem, direction: Direction) -> Result<f64> {
    let n = reduced.u.len();
    if path.len() != n {
        return Err(Error::GridMismatch {
            expected: n,
            got: path.len(),
        });
    }
    let dt = reduced.grid.step();
    let theta_bar = step_averages(reduced, n - 1);
    let quad_var: f64 = theta_bar.iter().map(|t| t * t).sum::<f64>() * dt;
    if quad_var == 0.0 {
        return Ok(0.0);
    }
    let stochastic: f64 = theta_bar
        .iter()
        .zip(path.windows(2))
        .map(|(t, w)| t * (w[1] - w[0]))
        .sum();
    Ok(match direction {
        Direction::PToQ => -stochastic - 0.5 * quad_var,
        Direction::QToP => stochastic - 0.5 * quad_var,
    })
}

/// `E[exp(−sN)] = exp(s²/2)` for standard normal `N`.
pub fn laplace_normal(s: f64) -> f64 {
    (0.5 * s * s).exp()
}
