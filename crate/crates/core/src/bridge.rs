//! Closed-form crossing probabilities for Brownian bridges against constant and
//! linear boundaries, and the marginal probabilities they integrate to.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Estimate, Method};
use crate::normal::{exp_flush, gaussian_pdf, normal_cdf, normal_sf};
use crate::quadrature::{adaptive_simpson, QuadratureControl};

/// Truncation of the two-boundary reflection series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesControl {
    pub tol: f64,
    pub j_max: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            tol: 1e-12,
            j_max: 64,
        }
    }
}

impl SeriesControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidControl("series.tol must be positive".into()));
        }
        if self.j_max == 0 {
            return Err(Error::InvalidControl("series.j_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Value of the two-boundary series with its truncation record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// Index of the last series term summed (0 when no series was needed).
    pub terms: usize,
    /// Bound on the absolute value of the discarded tail.
    pub remainder_bound: f64,
    /// The series stopped at `j_max` before reaching the tolerance.
    pub cap_hit: bool,
}

impl SeriesValue {
    fn certain() -> Self {
        SeriesValue {
            value: 1.0,
            terms: 0,
            remainder_bound: 0.0,
            cap_hit: false,
        }
    }
}

/// Probability that a Brownian bridge from 0 to `y` over `[0, horizon]` reaches level `level`.
pub fn bridge_cross_one_sided(level: f64, horizon: f64, y: f64) -> Result<f64> {
    if !(level > 0.0) {
        return Err(Error::InvalidLevel(level));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidHorizon(horizon));
    }
    Ok(one_sided_from_distances(level, level - y, horizon))
}

/// Crossing probability of a bridge whose distances to a linear boundary are
/// `d0` at the start and `d1` at the end.
#[inline]
pub(crate) fn one_sided_from_distances(d0: f64, d1: f64, dt: f64) -> f64 {
    if d0 <= 0.0 || d1 <= 0.0 {
        1.0
    } else {
        exp_flush(-2.0 * d0 * d1 / dt).0
    }
}

/// Probability that a Brownian bridge from 0 to `y` leaves the region between
/// `c(t) = c0 + c_slope·t` and the level `level`.
pub fn bridge_cross_two_sided(
    level: f64,
    c0: f64,
    c_slope: f64,
    horizon: f64,
    y: f64,
    ctrl: &SeriesControl,
) -> Result<SeriesValue> {
    ctrl.validate()?;
    if !(level > 0.0) {
        return Err(Error::InvalidLevel(level));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidHorizon(horizon));
    }
    if !(c0 < 0.0) {
        return Err(Error::OrderingViolated {
            lower: c0,
            start: 0.0,
            upper: level,
        });
    }
    let c_end = c0 + c_slope * horizon;
    if c_end >= level {
        return Err(Error::BoundariesCross {
            t: (level - c0) / c_slope,
        });
    }
    Ok(strip_cross(level, -c0, level - y, y - c_end, horizon, ctrl))
}

/// Crossing probability of a bridge between two lines, from the distances to
/// the upper line (`a0`, `a1`) and the lower line (`e0`, `e1`) at both ends.
///
/// Sums the alternating image series
/// `Σ_{j≥1} [e^{−2(jδ₀−e₀)(jδ₁−e₁)/T} + e^{−2(jδ₀−a₀)(jδ₁−a₁)/T}
///          − e^{−2j(jδ₀δ₁−δ₀e₁+δ₁e₀)/T} − e^{−2j(jδ₀δ₁−δ₀a₁+δ₁a₀)/T}]`
/// with `δ = a + e` the strip width.
pub(crate) fn strip_cross(a0: f64, e0: f64, a1: f64, e1: f64, dt: f64, ctrl: &SeriesControl) -> SeriesValue {
    if a0 <= 0.0 || e0 <= 0.0 || a1 <= 0.0 || e1 <= 0.0 {
        return SeriesValue::certain();
    }
    let (d0, d1) = (a0 + e0, a1 + e1);
    let scale = -2.0 / dt;
    let mut sum = 0.0;
    let mut last = 0;
    let mut converged = false;
    for j in 1..=ctrl.j_max {
        let jf = j as f64;
        let l1 = scale * (jf * d0 - e0) * (jf * d1 - e1);
        let l3 = scale * (jf * d0 - a0) * (jf * d1 - a1);
        let l2 = scale * jf * (jf * d0 * d1 - d0 * e1 + d1 * e0);
        let l4 = scale * jf * (jf * d0 * d1 - d0 * a1 + d1 * a0);
        let largest = l1.max(l2).max(l3).max(l4).exp();
        sum += l1.exp() + l3.exp() - l2.exp() - l4.exp();
        last = j;
        if largest < ctrl.tol {
            converged = true;
            break;
        }
    }
    SeriesValue {
        value: sum.clamp(0.0, 1.0),
        terms: last,
        remainder_bound: series_remainder_bound(last, d0, d1, dt),
        cap_hit: !converged,
    }
}

/// Bound on the series tail after index `j`:
/// `4·exp(−2j²δ₀δ₁/T) / (1 − exp(−2(2j+1)δ₀δ₁/T))`.
pub fn series_remainder_bound(j: usize, d0: f64, d1: f64, dt: f64) -> f64 {
    let jf = j as f64;
    let k = 2.0 * d0 * d1 / dt;
    4.0 * (-k * jf * jf).exp() / (1.0 - (-k * (2.0 * jf + 1.0)).exp())
}

/// `P(sup_{t≤T} (W_t − a t) ≥ b)` for Brownian motion `W`:
/// `1 − Φ((aT + b)/√T) + e^{−2ab} Φ((aT − b)/√T)`.
pub fn linear_one_sided_marginal(slope: f64, level: f64, horizon: f64) -> Result<f64> {
    if !(level > 0.0) {
        return Err(Error::InvalidLevel(level));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidHorizon(horizon));
    }
    let s = horizon.sqrt();
    let direct = normal_sf((slope * horizon + level) / s);
    let reflected_cdf = normal_cdf((slope * horizon - level) / s);
    let reflected = if reflected_cdf > 0.0 {
        exp_flush(-2.0 * slope * level + reflected_cdf.ln()).0
    } else {
        0.0
    };
    Ok((direct + reflected).clamp(0.0, 1.0))
}

/// Crossing probability of Brownian motion against the level `level` and the
/// line `c0 + c_slope·t`, by quadrature of the bridge series over `W_T`.
pub fn linear_two_sided_marginal(
    level: f64,
    c0: f64,
    c_slope: f64,
    horizon: f64,
    ctrl: &SeriesControl,
    quad: &QuadratureControl,
) -> Result<Estimate> {
    // validates the inputs and the ordering
    bridge_cross_two_sided(level, c0, c_slope, horizon, 0.0, ctrl)?;
    strip_marginal((level, 0.0), (c0, c_slope), horizon, ctrl, quad)
}

/// Crossing probability of Brownian motion against the lines
/// `upper.0 + upper.1·t` and `lower.0 + lower.1·t`.
pub(crate) fn strip_marginal(
    upper: (f64, f64),
    lower: (f64, f64),
    horizon: f64,
    ctrl: &SeriesControl,
    quad: &QuadratureControl,
) -> Result<Estimate> {
    ctrl.validate()?;
    quad.validate()?;
    let s = horizon.sqrt();
    let (top, bottom) = (upper.0 + upper.1 * horizon, lower.0 + lower.1 * horizon);
    let tails = normal_sf(top / s) + normal_cdf(bottom / s);
    let (lo, hi) = (bottom.max(-quad.tail_z * s), top.min(quad.tail_z * s));
    let tail_bound = 2.0 * normal_cdf(-quad.tail_z);
    let mut cap_hit = false;
    let mut remainder: f64 = 0.0;
    let r = {
        let integrand = |y: f64| {
            let v = strip_cross(upper.0, -lower.0, top - y, y - bottom, horizon, ctrl);
            cap_hit |= v.cap_hit;
            remainder = remainder.max(v.remainder_bound);
            gaussian_pdf(y, horizon) * v.value
        };
        let cell = std::cell::RefCell::new(integrand);
        adaptive_simpson(|y| (cell.borrow_mut())(y), lo, hi, quad.tol, quad.max_intervals)
    };
    if r.budget_exceeded {
        return Err(Error::QuadratureBudgetExceeded {
            estimate: tails + r.value,
            bound: r.error + tail_bound,
        });
    }
    let error = r.error + tail_bound + remainder.min(1.0) * (hi - lo).max(0.0) / (2.0 * std::f64::consts::PI * horizon).sqrt();
    Ok(Estimate::clamped(tails + r.value, error, Method::ClosedForm)
        .with("tail_bound", tail_bound)
        .with("quad_intervals", r.intervals as f64)
        .with("series_cap_hit", if cap_hit { 1.0 } else { 0.0 }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sided_bridge_values() {
        assert_eq!(bridge_cross_one_sided(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(bridge_cross_one_sided(1.0, 1.0, 2.0).unwrap(), 1.0);
        assert!((bridge_cross_one_sided(1.0, 1.0, 0.0).unwrap() - (-2.0f64).exp()).abs() < 1e-16);
        let near = bridge_cross_one_sided(1.0, 1.0, 1.0 - 1e-12).unwrap();
        assert!((near - 1.0).abs() < 1e-11);
        assert_eq!(bridge_cross_one_sided(0.0, 1.0, 0.0), Err(Error::InvalidLevel(0.0)));
    }

    #[test]
    fn symmetric_strip_matches_kolmogorov_series() {
        // P(sup|bridge| ≥ 1) = 1 − Σ_{k∈ℤ} (−1)^k e^{−2k²}
        let oracle = 1.0 - (-20i32..=20).map(|k| (-1f64).powi(k) * (-2.0 * (k * k) as f64).exp()).sum::<f64>();
        let v = bridge_cross_two_sided(1.0, -1.0, 0.0, 1.0, 0.0, &SeriesControl::default()).unwrap();
        assert!((v.value - oracle).abs() < 1e-14);
        assert!((v.value - 0.269_999_671_677_354_5).abs() < 1e-14);
        assert!(!v.cap_hit);
    }

    #[test]
    fn asymmetric_strip_matches_images() {
        // killed density by the method of images, divided by the free density
        let (u, l, y, t): (f64, f64, f64, f64) = (0.7, -1.5, 0.3, 2.0);
        let d = u - l;
        let phi = |z: f64| (-z * z / (2.0 * t)).exp();
        let killed: f64 = (-30..=30)
            .map(|k| {
                let k = k as f64;
                phi(y - 2.0 * k * d) - phi(y - 2.0 * u - 2.0 * k * d)
            })
            .sum();
        let oracle = 1.0 - killed / phi(y);
        let v = bridge_cross_two_sided(u, l, 0.0, t, y, &SeriesControl::default()).unwrap();
        assert!((v.value - oracle).abs() < 1e-13, "{} vs {}", v.value, oracle);
    }

    #[test]
    fn two_sided_edges() {
        let ctrl = SeriesControl::default();
        assert_eq!(bridge_cross_two_sided(1.0, -1.0, 0.0, 1.0, 1.0, &ctrl).unwrap().value, 1.0);
        assert_eq!(bridge_cross_two_sided(1.0, -1.0, 0.5, 1.0, -0.5, &ctrl).unwrap().value, 1.0);
        for y in [-0.5, 0.0, 0.5, 0.9] {
            let two = bridge_cross_two_sided(1.0, -40.0, 0.0, 1.0, y, &ctrl).unwrap().value;
            let one = bridge_cross_one_sided(1.0, 1.0, y).unwrap();
            assert!((two - one).abs() < 1e-12);
        }
        assert!(matches!(
            bridge_cross_two_sided(1.0, -1.0, 3.0, 1.0, 0.0, &ctrl),
            Err(Error::BoundariesCross { .. })
        ));
    }

    #[test]
    fn doubling_j_max_is_stable_and_bounded() {
        for &(c0, slope, t, y) in &[(-1.0, 0.0, 1.0, 0.0), (-0.2, 0.02, 4.0, 0.05), (-0.1, 0.0, 10.0, 0.05)] {
            let base = SeriesControl::default();
            let a = bridge_cross_two_sided(0.15, c0, slope, t, y, &base).unwrap();
            let b = bridge_cross_two_sided(0.15, c0, slope, t, y, &SeriesControl { j_max: 128, ..base }).unwrap();
            assert!((a.value - b.value).abs() <= 1e-10);
            assert!((a.value - b.value).abs() <= a.remainder_bound);
        }
    }

    #[test]
    fn cap_hit_is_reported() {
        let ctrl = SeriesControl { tol: 1e-14, j_max: 1 };
        let v = bridge_cross_two_sided(0.1, -0.1, 0.0, 10.0, 0.0, &ctrl).unwrap();
        assert!(v.cap_hit);
    }

    #[test]
    fn wang_marginal_values() {
        let reflection = 2.0 * normal_sf(1.0);
        assert!((linear_one_sided_marginal(0.0, 1.0, 1.0).unwrap() - reflection).abs() < 1e-15);
        assert!((reflection - 0.317_310_507_862_914_1).abs() < 1e-15);
        let v = linear_one_sided_marginal(1.0, 1.0, 1.0).unwrap();
        let oracle = normal_sf(2.0) + (-2.0f64).exp() * 0.5;
        assert!((v - oracle).abs() < 1e-15);
        assert!(linear_one_sided_marginal(0.0, 40.0, 1.0).unwrap() <= 1e-300);
    }

    #[test]
    fn two_sided_marginal_limits() {
        let (ctrl, quad) = (SeriesControl::default(), QuadratureControl::default());
        let far = linear_two_sided_marginal(1.0, -40.0, 0.0, 1.0, &ctrl, &quad).unwrap();
        assert!((far.value - linear_one_sided_marginal(0.0, 1.0, 1.0).unwrap()).abs() < 1e-9);
        let short = linear_two_sided_marginal(1.0, -1.0, 0.0, 1e-8, &ctrl, &quad).unwrap();
        assert!(short.value <= 1e-12);
    }

    #[test]
    fn symmetric_strip_marginal_matches_eigen_expansion() {
        // survival in (−1, 1) up to T = 1: (4/π) Σ (−1)^k/(2k+1) exp(−(2k+1)²π²/8)
        let pi = std::f64::consts::PI;
        let survival: f64 = (0..20)
            .map(|k| {
                let m = (2 * k + 1) as f64;
                (-1f64).powi(k) / m * (-m * m * pi * pi / 8.0).exp()
            })
            .sum::<f64>()
            * 4.0
            / pi;
        let v = linear_two_sided_marginal(1.0, -1.0, 0.0, 1.0, &SeriesControl::default(), &QuadratureControl::default()).unwrap();
        assert!((v.value - (1.0 - survival)).abs() < 1e-9, "{}", v.value);
    }
}
