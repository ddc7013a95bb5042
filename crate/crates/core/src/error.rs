use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Input failed range or consistency validation.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unknown mode label `{0}`")]
    UnknownMode(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A factory or operator needs a larger Fock cutoff than it was given.
    #[error("cutoff too small for mode `{mode}`: have {have}, need at least {required}")]
    CutoffTooSmall {
        mode: String,
        have: usize,
        required: usize,
    },

    /// Probability mass discarded by truncation exceeded the allowed bound.
    #[error("truncation loss {mass:.3e} exceeds bound {bound:.1e} ({context})")]
    Truncation {
        mass: f64,
        bound: f64,
        context: String,
    },

    #[error("heralding impossible: outcome probability {0:.3e}")]
    HeraldImpossible(f64),

    #[error("operator too large for dense evaluation: dimension {dim} > {limit}")]
    TooLarge { dim: usize, limit: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
