use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("zero vector: {0}")]
    ZeroVector(String),

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("basis `{basis}` is declared on `{declared}`, not on `{requested}`")]
    BasisMismatch {
        basis: String,
        declared: String,
        requested: String,
    },

    #[error("states live on different layouts")]
    LayoutMismatch,

    #[error("observer `{observer}` is not ready (overlap with `{ready}` is {overlap:.12})")]
    ObserverNotReady {
        observer: String,
        ready: String,
        overlap: f64,
    },

    #[error("invalid observer register: {0}")]
    InvalidObserver(String),

    #[error("outcome `{0}` has zero probability")]
    ZeroProbability(String),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("protocol contains collapse steps but no seed was given")]
    MissingSeed,

    #[error("malformed knowledge model: {0}")]
    MalformedKnowledge(String),

    #[error("prediction target mismatch: {0}")]
    TargetMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
