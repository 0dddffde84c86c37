use thiserror::Error;

/// Errors raised by validation, linear algebra and the experiment drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains NaN or infinite entries")]
    NonFinite,

    #[error("matrix is not Hermitian: max |M - M^dag| = {deviation:e} exceeds {tolerance:e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("trace is {trace} but must equal 1 within {tolerance:e}")]
    NotTraceOne { trace: f64, tolerance: f64 },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:e} below -{tolerance:e}")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("{which} is not faithful: min eigenvalue {min_eigenvalue:e} <= {threshold:e}{}", fmt_time(*.time))]
    NotFaithful {
        which: String,
        min_eigenvalue: f64,
        threshold: f64,
        time: Option<f64>,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("eigenvalue {eigenvalue:e} lies below the function domain minimum {domain_min:e}")]
    DomainViolation { eigenvalue: f64, domain_min: f64 },

    #[error("eigendecomposition backend failed: {0}")]
    BackendFailure(String),

    #[error("vector norm is {norm} but a unit vector is required")]
    NotNormalized { norm: f64 },

    #[error("ensemble has no atoms")]
    EmptyEnsemble,

    #[error("invalid ensemble weights: {0}")]
    InvalidWeights(String),

    #[error("atoms {first} and {second} coincide (Fubini-Study distance {distance:e})")]
    DuplicateAtoms {
        first: usize,
        second: usize,
        distance: f64,
    },

    #[error("atom {atom} matches {candidates} atoms of the other ensemble")]
    AmbiguousMatch { atom: usize, candidates: usize },

    #[error("atom lists differ: {0}")]
    AtomSetMismatch(String),

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("generator '{0}' is not flagged operator convex")]
    NotOperatorConvex(String),

    #[error("Kraus operators are not trace preserving: deviation {deviation:e}")]
    NotTracePreserving { deviation: f64 },

    #[error("invalid Lindblad model: {0}")]
    InvalidModel(String),

    #[error("evolved state failed validation: {0}")]
    ValidationFailure(String),

    #[error("SSE step at t = {time} produced norm {norm}; reduce dt")]
    StepExplosion { time: f64, norm: f64 },

    #[error("enumeration of {size} count vectors ({atoms} atoms, n = {n}) exceeds the budget")]
    BudgetExceeded { size: u128, atoms: usize, n: u64 },

    #[error("reference ensemble does not realize sigma (trace distance {distance:e})")]
    ReferenceMismatch { distance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed input: {0}")]
    Format(String),
}

fn fmt_time(time: Option<f64>) -> String {
    match time {
        Some(t) => format!(" at t = {t}"),
        None => String::new(),
    }
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "NotSquare",
            Error::NonFinite => "NonFinite",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::NotTraceOne { .. } => "NotTraceOne",
            Error::NotPsd { .. } => "NotPSD",
            Error::NotFaithful { .. } => "NotFaithful",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::DomainViolation { .. } => "DomainViolation",
            Error::BackendFailure(_) => "BackendFailure",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::EmptyEnsemble => "EmptyEnsemble",
            Error::InvalidWeights(_) => "InvalidWeights",
            Error::DuplicateAtoms { .. } => "DuplicateAtoms",
            Error::AmbiguousMatch { .. } => "AmbiguousMatch",
            Error::AtomSetMismatch(_) => "AtomSetMismatch",
            Error::InvalidCoupling(_) => "InvalidCoupling",
            Error::NotOperatorConvex(_) => "NotOperatorConvex",
            Error::NotTracePreserving { .. } => "NotTracePreserving",
            Error::InvalidModel(_) => "InvalidModel",
            Error::ValidationFailure(_) => "ValidationFailure",
            Error::StepExplosion { .. } => "StepExplosion",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::ReferenceMismatch { .. } => "ReferenceMismatch",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Format(_) => "Format",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, found })
    }
}
