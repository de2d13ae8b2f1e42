use bcross_core::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn one_sided_bridge_is_a_probability(level in 0.05f64..4.0, horizon in 0.05f64..5.0, y in -5.0f64..5.0) {
        let p = bridge_cross_one_sided(level, horizon, y).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        if y >= level {
            prop_assert_eq!(p, 1.0);
        }
    }

    #[test]
    fn one_sided_bridge_falls_with_level(level in 0.05f64..3.0, bump in 0.01f64..1.0, y in -3.0f64..0.0) {
        let low = bridge_cross_one_sided(level, 1.0, y).unwrap();
        let high = bridge_cross_one_sided(level + bump, 1.0, y).unwrap();
        prop_assert!(high <= low);
    }

    #[test]
    fn two_sided_bridge_dominates_one_sided(level in 0.2f64..2.0, c0 in -2.0f64..-0.2, y in -0.15f64..0.15) {
        let two = bridge_cross_two_sided(level, c0, 0.0, 1.0, y, &SeriesControl::default()).unwrap();
        let one = bridge_cross_one_sided(level, 1.0, y).unwrap();
        prop_assert!(two.value >= one - 1e-12);
        prop_assert!(two.value <= 1.0 + 1e-12);
        prop_assert!(two.remainder_bound >= 0.0);
    }

    #[test]
    fn linear_marginal_is_a_probability(slope in -1.0f64..2.0, level in 0.1f64..3.0, horizon in 0.1f64..4.0) {
        let p = linear_one_sided_marginal(slope, level, horizon).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn normal_cdf_is_symmetric(x in -30.0f64..30.0) {
        prop_assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
    }
}
