use thiserror::Error;

/// Errors raised by the identification toolkit.
///
/// Every variant maps to a stable string code (see [`Error::code`]) and to an
/// [`ErrorKind`], which the command line front end turns into exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("filter is improper: numerator degree {num} exceeds denominator degree {den}")]
    ImproperFilter { num: usize, den: usize },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("closed-loop estimation requires a reference signal")]
    MissingReference,
    #[error("closed-loop estimation requires a controller")]
    MissingController,
    #[error("noise covariance estimate is singular")]
    SingularSigma,
    #[error("normal matrix is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("iterate {iteration} produced an unstable denominator in subsystem {subsystem}")]
    UnstableIterate { iteration: usize, subsystem: usize },
    #[error("initial model is not stable: subsystem {0} violates the stability margin")]
    UnstableInitialModel(usize),
    #[error("feedback loop is not well posed (I + D_G D_C is singular)")]
    AlgebraicLoop,
    #[error("closed loop is unstable (spectral radius {0:.6})")]
    ClUnstable(f64),
    #[error("subsystem {0} has a real pole pair and is not an oscillatory mode")]
    NotOscillatory(usize),
    #[error("subsystem {0} has an unstable denominator")]
    UnstableMode(usize),
    #[error("subsystem {0} has a zero numerator")]
    DegenerateMode(usize),
    #[error("weighting matrix is not positive definite")]
    NotPdWeight,
    #[error("structure map Jacobian is rank deficient")]
    SingularJacobian,
    #[error("noise filter denominator is not stable")]
    UnstableNoiseFilter,
    #[error("noise-free output has zero power")]
    ZeroSignal,
    #[error("Monte Carlo sweep unreliable: {failed} of {total} runs failed at N = {n}")]
    McUnreliable {
        failed: usize,
        total: usize,
        n: usize,
    },
    #[error("result table is empty")]
    EmptyTable,
    #[error("numeric failure: {0}")]
    NumericFail(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input, wrong dimensions, contract violations.
    Validation,
    /// The numerics failed on otherwise valid input.
    Numeric,
    /// File system failures.
    Io,
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::ImproperFilter { .. } => "IMPROPER_FILTER",
            Error::DimMismatch(_) => "DIM_MISMATCH",
            Error::InvalidModel(_) => "INVALID_MODEL",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::MissingReference => "MISSING_REFERENCE",
            Error::MissingController => "MISSING_CONTROLLER",
            Error::SingularSigma => "SINGULAR_SIGMA",
            Error::IllConditioned(_) => "ILL_CONDITIONED",
            Error::UnstableIterate { .. } => "UNSTABLE_ITERATE",
            Error::UnstableInitialModel(_) => "UNSTABLE_INITIAL_MODEL",
            Error::AlgebraicLoop => "ALGEBRAIC_LOOP",
            Error::ClUnstable(_) => "CL_UNSTABLE",
            Error::NotOscillatory(_) => "NOT_OSCILLATORY",
            Error::UnstableMode(_) => "UNSTABLE_MODE",
            Error::DegenerateMode(_) => "DEGENERATE_MODE",
            Error::NotPdWeight => "NOT_PD_WEIGHT",
            Error::SingularJacobian => "SINGULAR_JACOBIAN",
            Error::UnstableNoiseFilter => "UNSTABLE_NOISE_FILTER",
            Error::ZeroSignal => "ZERO_SIGNAL",
            Error::McUnreliable { .. } => "MC_UNRELIABLE",
            Error::EmptyTable => "EMPTY_TABLE",
            Error::NumericFail(_) => "NUMERIC_FAIL",
            Error::Io(_) => "IO",
            Error::Json(_) => "JSON",
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::ImproperFilter { .. }
            | Error::DimMismatch(_)
            | Error::InvalidModel(_)
            | Error::InvalidArgument(_)
            | Error::MissingReference
            | Error::MissingController
            | Error::UnstableInitialModel(_)
            | Error::UnstableNoiseFilter
            | Error::EmptyTable
            | Error::NotPdWeight
            | Error::Json(_) => ErrorKind::Validation,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Numeric,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
