use thiserror::Error;

/// Errors produced by the spectral kernels, solvers and inverse-problem tools.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} is invalid: must be even and >= 16")]
    BadGridSize(usize),

    #[error("dimension mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fields live on different lattices ({0} vs {1})")]
    LatticeMismatch(usize, usize),

    #[error("fractional order must be nonnegative, got {0}")]
    NegativeOrder(f64),

    #[error("dissipation exponent alpha must lie in (1/2, 1), got {0}")]
    AlphaOutOfRange(f64),

    #[error("multiplier symbol violates order -1 bounds at k = ({0}, {1}): m = {2}")]
    MultiplierBound(i64, i64, f64),

    #[error("multiplier symbol is not even: m({0},{1}) = {2} but m({3},{4}) = {5}")]
    MultiplierNotEven(i64, i64, f64, i64, i64, f64),

    #[error("multiplier constants must satisfy 0 < c_lower <= c_upper, got c = {0}, C = {1}")]
    BadMultiplierConstants(f64, f64),

    #[error("kernel evaluation at the singular point x = 0 is rejected")]
    KernelAtOrigin,

    #[error("time grid invalid: T = {t_final}, M = {steps}")]
    BadTimeGrid { t_final: f64, steps: usize },

    #[error("source samples are bound to a different time grid")]
    TimeGridMismatch,

    #[error("trajectories live on different time grids")]
    TrajectoryGridMismatch,

    #[error("CFL violation at step {step}: max|u| dt N = {value} > {limit}")]
    CflViolation { step: usize, value: f64, limit: f64 },

    #[error("solution blew up (NaN/Inf) at step {step}")]
    Blowup { step: usize },

    #[error("q = {q} is inadmissible for alpha = {alpha}: requires 1/q <= alpha - 1/2")]
    InadmissibleLq { q: f64, alpha: f64 },

    #[error("epsilon must lie in (0, 1), got {0}")]
    EpsilonOutOfRange(f64),

    #[error("rate fit needs at least 3 usable sweep points, got {0}")]
    TooFewSweepPoints(usize),

    #[error("window radius must lie in (0, 1/4), got {0}")]
    BadWindowRadius(f64),

    #[error("regularization weight must be positive (the unregularized problem is ill-posed), got {0}")]
    BadRegularization(f64),

    #[error("source is not supported in the declared window: leakage {0}")]
    SupportViolation(f64),

    #[error("probe supports overlap: max pointwise product {0}")]
    OverlappingProbes(f64),

    #[error("probe support reaches the cube boundary: |x|_inf extends to {0}")]
    ProbeTouchesBoundary(f64),

    #[error("coordinate probe axis {probe_axis} does not match the one required to sample derivative axis {derivative_axis}")]
    ProbeAxisMismatch { probe_axis: usize, derivative_axis: usize },

    #[error("offset ({0}, {1}) cannot be realized with disjoint interior probe supports of width {2}")]
    UnrealizableOffset(f64, f64, f64),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
