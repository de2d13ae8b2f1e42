//! Boundary crossing probabilities for a drifted, scaled Wiener process
//! `Z = μ + σW` on a finite horizon, against one- or two-sided time-varying
//! boundaries.
//!
//! The crate reduces a problem to a Wiener process with a deterministic shift
//! against a constant level ([`boundary`]), changes measure to remove the shift
//! ([`girsanov`]), and evaluates the conditional crossing probability given the
//! terminal value with Brownian-bridge closed forms ([`bridge`]). [`estimators`]
//! integrates those conditionals over the terminal value, [`timesplit`] chains
//! local kernels over a partition of the horizon, and [`mc`] provides the Monte
//! Carlo ground truth everything is checked against.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod bridge;
pub mod error;
pub mod estimate;
pub mod estimators;
pub mod girsanov;
pub mod mc;
pub mod normal;
pub mod quadrature;
pub mod timesplit;

pub use boundary::{
    reduce_one_sided, reduce_two_sided, sample_theta, validate_novikov, BoundaryCurve, Grid,
    LowerLine, NovikovReport, OneSidedProblem, ReducedProblem, Side, TwoSidedProblem,
};
pub use bridge::{
    bridge_cross_one_sided, bridge_cross_two_sided, linear_one_sided_marginal,
    linear_two_sided_marginal, SeriesControl, SeriesValue,
};
pub use error::{Error, Result};
pub use estimate::{Diagnostics, Estimate, Method};
pub use estimators::{
    closed_form_marginal, conditional_explicit, conditional_hybrid,
    conditional_two_sided_explicit, conditional_two_sided_hybrid, marginal, mixture_marginal,
    paper_literal_marginal, problem_marginal, MarginalMethod, Mode, Problem, Scenario,
    ScenarioMixture,
};
pub use girsanov::{
    compute_coefficients, decompose_endpoint, laplace_normal, log_radon_nikodym, Direction,
    GirsanovCoefficients,
};
pub use mc::{
    bridge_mc, conditional_bridge_mc, decomposition_stats, factorization_gap,
    girsanov_importance_mc, p_bridge_mc, path_mc_one_sided, path_mc_two_sided,
    step_halving_check, DecompositionReport, FactorizationGap, MCControl, StepHalving,
};
pub use normal::normal_cdf;
pub use quadrature::QuadratureControl;
pub use timesplit::{split_marginal, split_marginal_two_sided, LocalMethod, SplitControl};
