use bcross_core::quadrature::gauss_legendre_on;
use bcross_core::*;

fn brownian(boundary: BoundaryCurve, horizon: f64) -> OneSidedProblem {
    OneSidedProblem::new(BoundaryCurve::constant(0.0), 1.0, boundary, horizon)
}

fn strip(upper: f64, lower: f64, beta: f64) -> TwoSidedProblem {
    TwoSidedProblem::new(
        BoundaryCurve::constant(0.0),
        1.0,
        BoundaryCurve::constant(upper),
        BoundaryCurve::linear(lower, beta),
        beta,
        1.0,
    )
}

fn explicit(p: &OneSidedProblem) -> f64 {
    problem_marginal(&Problem::OneSided(p.clone()), MarginalMethod::Explicit, &QuadratureControl::default(), None)
        .unwrap()
        .value
}

#[test]
fn strip_path_mc_matches_series_quadrature() {
    let q = linear_two_sided_marginal(1.0, -1.0, 0.0, 1.0, &SeriesControl::default(), &QuadratureControl::default())
        .unwrap();
    assert!((q.value - 0.6292225702).abs() < 1e-8, "{}", q.value);
    let mc = path_mc_two_sided(&strip(1.0, -1.0, 0.0), &MCControl::new(400_000, 512, 21)).unwrap();
    assert!((mc.value - q.value).abs() <= 3.0 * mc.error, "{} +- {} vs {}", mc.value, mc.error, q.value);
}

#[test]
fn distant_lower_boundary_reduces_to_one_sided() {
    let mc = MCControl::new(100_000, 256, 4);
    let one = path_mc_one_sided(&brownian(BoundaryCurve::constant(1.0), 1.0), &mc).unwrap();
    let two = path_mc_two_sided(&strip(1.0, -40.0, 0.0), &mc).unwrap();
    assert!((one.value - two.value).abs() <= 3.0 * one.error.hypot(two.error));
    let q = linear_two_sided_marginal(1.0, -40.0, 0.0, 1.0, &SeriesControl::default(), &QuadratureControl::default())
        .unwrap();
    assert!((q.value - 2.0 * (1.0 - normal_cdf(1.0))).abs() < 1e-8);
}

#[test]
fn survival_products_reduce_variance_and_discretization_bias() {
    let p = brownian(BoundaryCurve::constant(1.0), 1.0);
    let e = path_mc_one_sided(&p, &MCControl::new(50_000, 64, 6)).unwrap();
    let naive = e.diagnostic("grid_indicator_variance").unwrap();
    let product = e.diagnostic("survival_product_variance").unwrap();
    assert!(product < naive);
    let naive_mean = e.diagnostic("grid_indicator_value").unwrap();
    assert!(naive_mean < e.value, "grid monitoring misses crossings");
    let halving = step_halving_check(&p, &MCControl::new(50_000, 64, 6)).unwrap();
    assert!(halving.sigmas <= 3.0);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let p = brownian(BoundaryCurve::sinusoid(0.5, std::f64::consts::PI, 0.0, 1.0), 1.0);
    let mc = MCControl::new(5_000, 64, 9);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| path_mc_one_sided(&p, &mc).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.error.to_bits(), b.error.to_bits());
}

#[test]
fn same_seed_same_estimate_and_different_seed_differs() {
    let p = brownian(BoundaryCurve::linear(1.0, 0.5), 1.0);
    let a = path_mc_one_sided(&p, &MCControl::new(2_000, 32, 1)).unwrap();
    let b = path_mc_one_sided(&p, &MCControl::new(2_000, 32, 1)).unwrap();
    let c = path_mc_one_sided(&p, &MCControl::new(2_000, 32, 2)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.value, c.value);
}

#[test]
fn importance_sampling_agrees_with_linear_closed_form() {
    let p = brownian(BoundaryCurve::linear(1.0, 1.0), 1.0);
    let r = reduce_one_sided(&p).unwrap();
    let c = GirsanovCoefficients::resolve(&r).unwrap();
    let e = girsanov_importance_mc(&r, &c, &MCControl::new(100_000, 128, 7), Direction::QToP).unwrap();
    let exact = linear_one_sided_marginal(1.0, 1.0, 1.0).unwrap();
    assert!((e.value - exact).abs() <= 3.0 * e.error, "{} +- {}", e.value, e.error);
    assert!(e.diagnostic("effective_sample_size").unwrap() > 1_000.0);
}

#[test]
fn marginal_grows_with_horizon() {
    let mut last = 0.0;
    for t in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let p = brownian(BoundaryCurve::polynomial(vec![1.0, 0.0, 0.3]), t);
        let v = split_marginal(&p, &SplitControl::new(8, LocalMethod::PiecewiseLinear)).unwrap().value;
        assert!(v > last, "T={t}: {v} <= {last}");
        last = v;
    }
}

#[test]
fn two_sided_exceeds_one_sided() {
    let one = explicit(&brownian(BoundaryCurve::constant(1.0), 1.0));
    for lower in [-3.0, -1.5, -1.0] {
        let two = problem_marginal(
            &Problem::TwoSided(strip(1.0, lower, 0.0)),
            MarginalMethod::Explicit,
            &QuadratureControl::default(),
            None,
        )
        .unwrap();
        assert!(two.value >= one - 1e-12);
    }
}

#[test]
fn marginal_integrates_the_conditional() {
    let p = brownian(BoundaryCurve::sinusoid(0.3, 2.0, 0.0, 1.2), 1.0);
    let r = reduce_one_sided(&p).unwrap();
    let kink = r.level - r.u_end();
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut total = 1.0 - normal_cdf(kink);
    let edges: Vec<f64> = (0..=64).map(|i| -9.0 + (kink + 9.0) * i as f64 / 64.0).collect();
    for w in edges.windows(2) {
        let (xs, ws) = gauss_legendre_on(16, w[0], w[1]);
        for (x, wt) in xs.iter().zip(&ws) {
            total += wt * density(*x) * conditional_explicit(&r, *x).unwrap();
        }
    }
    assert!((total - explicit(&p)).abs() < 1e-9, "{total} vs {}", explicit(&p));
}

#[test]
fn two_sided_hybrid_tracks_bridge_oracle() {
    let p = TwoSidedProblem::new(
        BoundaryCurve::constant(0.0),
        1.0,
        BoundaryCurve::polynomial(vec![1.0, 0.0, 1.0]),
        BoundaryCurve::polynomial(vec![-1.0, 0.0, 1.0]),
        0.0,
        1.0,
    );
    let r = reduce_two_sided(&p).unwrap();
    let c = GirsanovCoefficients::resolve(&r).unwrap();
    let h = conditional_two_sided_hybrid(&r, &c, 0.5, &MCControl::new(100_000, 256, 2), Mode::Corrected).unwrap();
    let b = p_bridge_mc(&r, 0.5, &MCControl::new(100_000, 256, 3)).unwrap();
    assert!((h.value - b.value).abs() <= 3.0 * h.error.hypot(b.error));
    assert_eq!(conditional_two_sided_hybrid(&r, &c, 0.0, &MCControl::new(1_000, 32, 2), Mode::Corrected).unwrap().value, 1.0);
}

#[test]
fn literal_to_corrected_ratio_on_linear_shift() {
    let p = brownian(BoundaryCurve::linear(1.0, 0.5), 1.0);
    let r = reduce_one_sided(&p).unwrap();
    let c = GirsanovCoefficients::resolve(&r).unwrap();
    let m = MCControl::new(1_000, 16, 1);
    let x = 0.3;
    let lit = conditional_hybrid(&r, &c, x, &m, Mode::Literal).unwrap().value;
    let cor = conditional_hybrid(&r, &c, x, &m, Mode::Corrected).unwrap().value;
    assert!((lit / cor - (0.5f64 * x + 0.125).exp()).abs() < 1e-12);
}

#[test]
fn sigma_scaling_mixture() {
    let scenario = |sigma| Problem::OneSided(OneSidedProblem::new(BoundaryCurve::constant(0.0), sigma, BoundaryCurve::constant(1.0), 1.0));
    let mix = ScenarioMixture::new(vec![(0.5, scenario(1.0)), (0.5, scenario(2.0))]).unwrap();
    let v = mixture_marginal(&mix, MarginalMethod::Explicit, &QuadratureControl::default(), None).unwrap();
    let exact = (1.0 - normal_cdf(1.0)) + (1.0 - normal_cdf(0.5));
    assert!((v.value - exact).abs() < 1e-8);
}

#[test]
fn timesplit_refines_with_nodes_and_splits() {
    let p = brownian(BoundaryCurve::polynomial(vec![1.0, 0.0, 1.0]), 1.0);
    let coarse = split_marginal(&p, &SplitControl { n_nodes: 32, ..SplitControl::new(4, LocalMethod::PiecewiseLinear) }).unwrap();
    let fine = split_marginal(&p, &SplitControl { n_nodes: 64, ..SplitControl::new(4, LocalMethod::PiecewiseLinear) }).unwrap();
    assert!((coarse.value - fine.value).abs() < 1e-8);
    let two = split_marginal_two_sided(&strip(1.0, -1.0, 0.0), &SplitControl::new(4, LocalMethod::PiecewiseLinear)).unwrap();
    assert!((two.value - 0.6292225702).abs() < 1e-6, "{}", two.value);
}
