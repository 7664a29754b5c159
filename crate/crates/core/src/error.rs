use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which hypothesis of an inequality verifier failed on the sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// `sup ‖x - φ(x)‖ ≤ μ` over the base subset.
    Displacement,
    /// `sup ‖f_{t0}(x)‖ ≤ μ / t0` over the base subset.
    QuotientSize,
    /// A measured localized Lipschitz modulus exceeds the supplied bound.
    LipschitzBound,
    /// A path-length certificate is needed but was not supplied.
    PathCertificate,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Hypothesis::Displacement => "sup ‖x - φ(x)‖ ≤ μ",
            Hypothesis::QuotientSize => "sup ‖f_t0(x)‖ ≤ μ/t0",
            Hypothesis::LipschitzBound => "localized Lipschitz bound",
            Hypothesis::PathCertificate => "finite path-length certificate",
        };
        f.write_str(s)
    }
}

/// Where a trajectory left its domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Escape {
    /// Continuous time at which the flow was first seen outside.
    Time(f64),
    /// Index of the first iterate outside the domain.
    Iterate(usize),
}

impl std::fmt::Display for Escape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Escape::Time(t) => write!(f, "t ≈ {t:.6e}"),
            Escape::Iterate(k) => write!(f, "iterate k = {k}"),
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the closed domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("margin violation: need {required:.6e}, have {available:.6e}")]
    MarginViolation { required: f64, available: f64 },

    #[error("sample is empty")]
    EmptySample,

    #[error("curve segment {segment} leaves the domain near {at:?}")]
    CurveExitsDomain { segment: usize, at: Vec<f64> },

    #[error("points lie in different connected components")]
    Unreachable,

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("trajectory escapes the domain at {0}")]
    TrajectoryEscape(Escape),

    #[error("integrator step size underflow at t = {time:.6e} (h = {step:.3e})")]
    StiffnessFailure { time: f64, step: f64 },

    #[error("degenerate pair at index {index}: x = x̃")]
    DegeneratePair { index: usize },

    #[error("sample contract violated: {0}")]
    ContractViolation(String),

    #[error("hypothesis not met ({hypothesis}): measured {measured:.6e} > bound {bound:.6e} at {witness:?}")]
    HypothesisNotMet {
        hypothesis: Hypothesis,
        measured: f64,
        bound: f64,
        witness: Vec<f64>,
    },

    #[error("no δ₁ on the grid: {0}")]
    NoDelta1(String),

    #[error("difference quotients diverge: gap {gap:.6e} at t = {t:.6e}")]
    Diverging { t: f64, gap: f64 },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
