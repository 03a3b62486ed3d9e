use thiserror::Error;

/// Errors raised by the operator algebra, learner pipeline and bound evaluators.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),

    #[error("subsystem `{label}` has invalid dimension {dim}")]
    InvalidDimension { label: String, dim: usize },

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("density operator has trace {trace}")]
    NotNormalized { trace: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("effect operator spectrum [{min:.3e}, {max:.3e}] leaves [0, 1]")]
    EffectOutOfRange { min: f64, max: f64 },

    #[error("logarithm of a singular operator (eigenvalue {eigenvalue:.3e})")]
    SingularLog { eigenvalue: f64 },

    #[error("invalid probability table: {0}")]
    InvalidProbability(String),

    #[error("POVM effects do not sum to the identity (deviation {deviation:.3e})")]
    PovmIncomplete { deviation: f64 },

    #[error("channel is not trace preserving (deviation {deviation:.3e})")]
    NotTracePreserving { deviation: f64 },

    #[error("outcome {hypothesis} for sample {sample} has probability {prob:.3e}; post-measurement state undefined")]
    ZeroProbabilityOutcome { sample: usize, hypothesis: usize, prob: f64 },

    #[error("skipped probability mass {deficit:.3e} exceeds 1e-9")]
    MassDeficit { deficit: f64 },

    #[error("enumeration of {pairs} (sample, hypothesis) pairs exceeds the cap {cap}")]
    EnumerationCap { pairs: u128, cap: u128 },

    #[error("invalid MGF bound: {0}")]
    InvalidMgfBound(String),

    #[error("search range exhausted: {0}")]
    RangeExhausted(String),

    #[error("factorization required but missing: {0}")]
    NotFactorized(String),

    #[error("dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("conic solver failed: {0}")]
    SolverFailure(String),

    #[error("covering net of size {size} exceeds the cap {cap}")]
    NetTooLarge { size: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for failures of numerical routines rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SolverFailure(_)
                | Error::RangeExhausted(_)
                | Error::SingularLog { .. }
                | Error::MassDeficit { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
