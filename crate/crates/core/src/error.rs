use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sigma must be positive, got {0}")]
    SigmaNonpositive(f64),

    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),

    #[error("grid needs at least 2 nodes, got {0}")]
    GridTooSmall(usize),

    #[error("process starts at {start} which is not below the boundary value {boundary}")]
    StartOnOrAboveBoundary { start: f64, boundary: f64 },

    #[error("need lower < start < upper at t = 0, got {lower} < {start} < {upper}")]
    OrderingViolated { lower: f64, start: f64, upper: f64 },

    #[error("non-finite value in {what} at t = {t}")]
    NonfiniteCurve { what: &'static str, t: f64 },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("curve knots cover [{first}, {last}] but the horizon needs [0, {horizon}]")]
    CurveDomain { first: f64, last: f64, horizon: f64 },

    #[error("boundary deviations are not related by beta*t: deviation {deviation:e} at t = {t} exceeds {tol:e}")]
    BetaRestrictionViolated { t: f64, deviation: f64, tol: f64 },

    #[error("non-finite derivative at grid node {index}")]
    NonfiniteDerivative { index: usize },

    #[error("drift shift u is identically zero; use the constant-boundary closed form")]
    DegenerateDrift,

    #[error("non-finite integral of theta")]
    NonfiniteIntegral,

    #[error("alpha_tilde is zero; W-tilde is undefined")]
    AlphaTildeZero,

    #[error("path has {got} nodes but the grid has {expected}")]
    GridMismatch { expected: usize, got: usize },

    #[error("boundary level must be positive, got {0}")]
    InvalidLevel(f64),

    #[error("lower boundary reaches the upper boundary at t = {t}")]
    BoundariesCross { t: f64 },

    #[error("quadrature budget exhausted: best estimate {estimate}, error bound {bound:e}")]
    QuadratureBudgetExceeded { estimate: f64, bound: f64 },

    #[error("invalid control: {0}")]
    InvalidControl(String),

    #[error("log-weight {log_weight} on path {path} is outside [-700, 700]")]
    WeightOverflow { path: usize, log_weight: f64 },

    #[error("operation needs a {expected} problem")]
    SideMismatch { expected: &'static str },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("scenario {index}: {source}")]
    Scenario { index: usize, source: Box<Error> },
}

impl Error {
    /// True for errors caused by invalid inputs, as opposed to numerical failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::NonfiniteIntegral
            | Error::NonfiniteDerivative { .. }
            | Error::QuadratureBudgetExceeded { .. }
            | Error::WeightOverflow { .. } => false,
            Error::Scenario { source, .. } => source.is_validation(),
            _ => true,
        }
    }
}
