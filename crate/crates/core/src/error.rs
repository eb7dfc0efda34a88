use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("spectral function undefined at eigenvalue {eigenvalue:.3e}")]
    DomainError { eigenvalue: f64 },

    #[error("dimension {dim} exceeds the cap of {cap}")]
    Overflow { dim: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("state does not have full support (min eigenvalue {min_eigenvalue:.3e})")]
    NotFullSupport { min_eigenvalue: f64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation failed [{invariant}]: {detail}")]
    Validation {
        invariant: &'static str,
        detail: String,
    },

    #[error("support violation: q({index}) = {q:.3e} while p({index}) = {p:.3e}")]
    SupportViolation { index: usize, p: f64, q: f64 },

    #[error("expected a qubit pair, got dimension {0}")]
    WrongDimension(usize),

    #[error("tau = {tau} must lie strictly between 0 and min(D_M) = {limit}")]
    TauTooLarge { tau: f64, limit: f64 },

    #[error("states are indistinguishable (measured relative entropy {0:.3e})")]
    NotDistinguishable(f64),

    #[error("outcome {0} has a numerically zero POVM element")]
    ZeroProbabilityOutcome(usize),

    #[error("empty input")]
    EmptyInput,

    #[error("{0} truncated trial(s) present; the change-of-measure identity needs a genuine stopping time")]
    TruncatedPresent(usize),

    #[error("trial outcomes carry no trajectories")]
    NoTrajectories,

    #[error("region is degenerate: every support value is below 1e-9")]
    DegenerateRegion,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Validation {
            invariant,
            detail: detail.into(),
        }
    }

    /// Short machine-readable tag used by the command line front end.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::NotHermitian { .. } => "not-hermitian",
            Error::NonFinite => "non-finite",
            Error::DomainError { .. } => "domain",
            Error::Overflow { .. } => "overflow",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::OutOfRange(_) => "out-of-range",
            Error::NotFullSupport { .. } => "full-support",
            Error::Schema(_) => "schema",
            Error::Validation { invariant, .. } => invariant,
            Error::SupportViolation { .. } => "support-violation",
            Error::WrongDimension(_) => "wrong-dimension",
            Error::TauTooLarge { .. } => "tau-too-large",
            Error::NotDistinguishable(_) => "not-distinguishable",
            Error::ZeroProbabilityOutcome(_) => "zero-probability-outcome",
            Error::EmptyInput => "empty-input",
            Error::TruncatedPresent(_) => "truncated-present",
            Error::NoTrajectories => "no-trajectories",
            Error::DegenerateRegion => "degenerate-region",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Io(_) => "io",
        }
    }

    /// True for errors caused by bad input or configuration rather than numerics.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::DomainError { .. } | Error::SupportViolation { .. } | Error::ZeroProbabilityOutcome(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
