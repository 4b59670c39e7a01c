use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure at phi = {phi}: {reason}")]
    NumericalFailure { phi: f64, reason: String },

    #[error("internal consistency violated: {0}")]
    InternalConsistency(String),

    #[error("kappa calibration rejected: max relative deviation {max_rel_deviation:.3e} (limit {limit:.1e})")]
    CalibrationFailure { max_rel_deviation: f64, limit: f64 },

    #[error("no finite sensitivity in the search interval [{lo}, {hi}]")]
    NoOptimum { lo: f64, hi: f64 },

    #[error("Fock cutoff {cutoff} too small: tail mass {tail_mass:.3e}, try cutoff >= {suggested}")]
    CutoffTooSmall {
        cutoff: usize,
        tail_mass: f64,
        suggested: usize,
    },

    #[error("Fock basis dimension {dimension} exceeds the configured bound {limit}")]
    ResourceLimit { dimension: usize, limit: usize },

    #[error("sweep failed at phi = {phi}: {source}")]
    AtPhase {
        phi: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
