use thiserror::Error;

/// Errors raised by algebra, context, state and experiment operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: algebra elements need dim >= 1")]
    InvalidDimension(usize),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("element is not hermitian: |R - R*|_F = {defect:e}")]
    NonHermitian { defect: f64 },

    #[error("observable `{name}` is not hermitian: |R - R*|_F = {defect:e}")]
    NonHermitianNamed { name: String, defect: f64 },

    #[error("generators `{first}` and `{second}` do not commute: |[A,B]|_F = {defect:e}")]
    IncompatibleGenerators {
        first: String,
        second: String,
        defect: f64,
    },

    #[error("a measurement context needs at least one generator")]
    EmptyGeneratingSet,

    #[error("observable is not contained in context `{context}`")]
    NotInContext { context: String },

    #[error("character does not belong to context `{context}`")]
    CharacterMismatch { context: String },

    #[error("no character of `{context}` agrees with the recorded coordinates")]
    InconsistentExtension { context: String },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("label does not select exactly one basis column of `{context}` ({matches} matches)")]
    AmbiguousLabel { context: String, matches: usize },

    #[error("empty sample list")]
    EmptySamples,

    #[error("sample count {got} below the required minimum {min}")]
    TooFewSamples { got: usize, min: usize },

    #[error("numerical failure: {what} (offending value {value:e})")]
    NumericalFailure { what: String, value: f64 },

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("malformed model: {0}")]
    Model(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
