//! One-dimensional quadrature: trapezoid sums on uniform grids, adaptive
//! Simpson with Richardson correction, and Gauss–Legendre rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Controls for the marginal integrals over the terminal value `W_T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureControl {
    pub tol: f64,
    pub max_intervals: usize,
    /// The integration domain is cut at `tail_z` standard deviations.
    pub tail_z: f64,
    /// Gauss–Legendre nodes used when the integrand is itself a Monte Carlo estimate.
    pub mc_nodes: usize,
}

impl Default for QuadratureControl {
    fn default() -> Self {
        QuadratureControl {
            tol: 1e-9,
            max_intervals: 4096,
            tail_z: 8.0,
            mc_nodes: 24,
        }
    }
}

impl QuadratureControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidControl("quad.tol must be positive".into()));
        }
        if self.max_intervals == 0 {
            return Err(Error::InvalidControl("quad.max_intervals must be positive".into()));
        }
        if !(self.tail_z >= 4.0) {
            return Err(Error::InvalidControl("quad.tail_z must be at least 4".into()));
        }
        if self.mc_nodes < 2 {
            return Err(Error::InvalidControl("quad.mc_nodes must be at least 2".into()));
        }
        Ok(())
    }
}

/// Trapezoid rule on a uniform grid with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
    pub budget_exceeded: bool,
}

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
///
/// Intervals are bisected until the two-level Simpson difference is below
/// `15 · tol · width / (b − a)` or the interval budget runs out; the reported
/// error sums `|S₂ − S₁|/15` over the accepted intervals.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
) -> QuadResult {
    if !(b > a) {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
            budget_exceeded: false,
        };
    }
    struct Piece {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        depth: u32,
    }
    let simpson = |a: f64, b: f64, fa: f64, fm: f64, fb: f64| (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let width = b - a;

    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let mut stack = vec![Piece {
        a,
        b,
        fa,
        fm,
        fb,
        whole: simpson(a, b, fa, fm, fb),
        depth: 0,
    }];
    let (mut value, mut error) = (0.0, 0.0);
    let mut intervals = 1usize;
    let mut budget_exceeded = false;

    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let (lm, rm) = (0.5 * (p.a + m), 0.5 * (m + p.b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let diff = left + right - p.whole;
        let local_tol = tol * (p.b - p.a) / width;
        let converged = diff.abs() <= 15.0 * local_tol && p.depth >= 2;
        if converged || p.depth >= 50 || intervals >= max_intervals {
            if !converged {
                budget_exceeded = true;
            }
            value += left + right + diff / 15.0;
            error += diff.abs() / 15.0;
        } else {
            intervals += 1;
            stack.push(Piece {
                a: m,
                b: p.b,
                fa: p.fm,
                fm: frm,
                fb: p.fb,
                whole: right,
                depth: p.depth + 1,
            });
            stack.push(Piece {
                a: p.a,
                b: m,
                fa: p.fa,
                fm: flm,
                fb: p.fm,
                whole: left,
                depth: p.depth + 1,
            });
        }
    }
    QuadResult {
        value,
        error,
        intervals,
        budget_exceeded,
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
    (
        x.iter().map(|x| mid + half * x).collect(),
        w.iter().map(|w| half * w).collect(),
    )
}

/// Composite Gauss–Legendre on `[a, b]` with panels no wider than `max_width`.
pub fn composite_gauss_legendre(
    nodes_per_panel: usize,
    a: f64,
    b: f64,
    max_width: f64,
) -> (Vec<f64>, Vec<f64>) {
    if !(b > a) {
        return (Vec::new(), Vec::new());
    }
    let panels = ((b - a) / max_width).ceil().max(1.0) as usize;
    let (x, w) = gauss_legendre(nodes_per_panel);
    let width = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * nodes_per_panel);
    let mut ws = Vec::with_capacity(panels * nodes_per_panel);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for (xi, wi) in x.iter().zip(&w) {
            xs.push(mid + 0.5 * width * xi);
            ws.push(0.5 * width * wi);
        }
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let h = 0.25;
        let v: Vec<f64> = (0..5).map(|i| 2.0 * i as f64 * h + 1.0).collect();
        assert!((trapezoid(&v, h) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn simpson_integrates_gaussian() {
        let r = adaptive_simpson(crate::normal::normal_pdf, -8.0, 1.0, 1e-12, 4096);
        assert!(!r.budget_exceeded);
        assert!((r.value - crate::normal::normal_cdf(1.0)).abs() < 1e-12);
    }

    #[test]
    fn simpson_reports_budget() {
        let r = adaptive_simpson(|x: f64| (50.0 * x).sin().abs(), 0.0, 10.0, 1e-14, 8);
        assert!(r.budget_exceeded);
    }

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(6);
        // degree 11 is the highest exact degree for 6 nodes
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((got - 2.0 / 11.0).abs() < 1e-14);
        let (x, w) = gauss_legendre_on(7, 0.0, 2.0);
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(3)).sum();
        assert!((got - 4.0).abs() < 1e-13);
    }

    #[test]
    fn composite_rule_covers_interval() {
        let (x, w) = composite_gauss_legendre(8, -1.0, 3.0, 0.5);
        assert_eq!(x.len(), 64);
        assert!((w.iter().sum::<f64>() - 4.0).abs() < 1e-13);
    }
}
