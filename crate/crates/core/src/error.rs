//! Error type shared by every analysis module.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong while validating inputs or running an
/// analysis. Variants carry enough context to point at the offending
/// prompt/model/cell; orchestration layers add file locations on top.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The two structures do not cover the same prompt set.
    MismatchedPrompts {
        missing_in_performance: Vec<String>,
        missing_in_embeddings: Vec<String>,
    },
    /// An identifier list contains a repeated entry.
    DuplicateId { id: String },
    /// Matrix shape below the analysis minimum.
    TooFewRows { rows: usize, min: usize },
    /// Matrix shape below the analysis minimum.
    TooFewColumns { cols: usize, min: usize },
    /// Row lengths disagree with the declared shape.
    RaggedRows { row: usize, expected: usize, found: usize },
    /// A performance value outside `[0, 1]`.
    ValueOutOfRange { row: usize, col: usize, value: f64 },
    /// A value in a `Binary` matrix that is neither 0 nor 1.
    NonBinaryValue { row: usize, col: usize, value: f64 },
    /// Hamming/Jaccard similarity requested on non-binary data.
    NonBinaryInput,
    /// Vectors of different lengths where equal lengths are required.
    LengthMismatch { left: usize, right: usize },
    /// Similarity undefined on this input (zero vectors).
    UndefinedSimilarity { reason: &'static str },
    /// An embedding row is the all-zero vector.
    ZeroVector { row: usize },
    /// Embedding rows with inconsistent dimensions.
    DimensionMismatch { row: usize, expected: usize, found: usize },
    /// An operation that needs at least one value got none.
    EmptyInput,
    /// A p-value outside `[0, 1]`.
    ProbabilityOutOfRange { index: usize, value: f64 },
    /// Cluster count incompatible with the data size.
    InvalidK { k: usize, n: usize },
    /// Silhouette needs at least two clusters.
    SingleCluster,
    /// The data cannot support the requested clustering (for cosine
    /// geometry: fewer distinct usable directions than clusters).
    DegenerateInput { reason: &'static str },
    /// Weight vector does not satisfy the simplex invariants.
    InvalidWeights { reason: &'static str },
    /// Regression with all-zero regressor values.
    DegenerateRegressor,
    /// Too few observations for the requested fit.
    TooFewObservations { found: usize, required: usize },
    /// A caller-supplied configuration value is unusable.
    InvalidConfig { reason: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::MismatchedPrompts {
                missing_in_performance,
                missing_in_embeddings,
            } => write!(
                f,
                "prompt sets differ: {} missing from performance side, {} missing from embedding side ({:?} / {:?})",
                missing_in_performance.len(),
                missing_in_embeddings.len(),
                missing_in_performance,
                missing_in_embeddings
            ),
            Error::DuplicateId { id } => write!(f, "duplicate identifier {id:?}"),
            Error::TooFewRows { rows, min } => {
                write!(f, "matrix has {rows} rows, need at least {min}")
            }
            Error::TooFewColumns { cols, min } => {
                write!(f, "matrix has {cols} columns, need at least {min}")
            }
            Error::RaggedRows { row, expected, found } => {
                write!(f, "row {row} has {found} values, expected {expected}")
            }
            Error::ValueOutOfRange { row, col, value } => {
                write!(f, "value {value} at ({row}, {col}) outside [0, 1]")
            }
            Error::NonBinaryValue { row, col, value } => {
                write!(f, "binary matrix holds {value} at ({row}, {col})")
            }
            Error::NonBinaryInput => {
                write!(f, "measure defined only for binary (0/1) inputs")
            }
            Error::LengthMismatch { left, right } => {
                write!(f, "vector lengths differ: {left} vs {right}")
            }
            Error::UndefinedSimilarity { reason } => {
                write!(f, "similarity undefined: {reason}")
            }
            Error::ZeroVector { row } => write!(f, "embedding row {row} is all-zero"),
            Error::DimensionMismatch { row, expected, found } => {
                write!(f, "embedding row {row} has dimension {found}, expected {expected}")
            }
            Error::EmptyInput => write!(f, "empty input"),
            Error::ProbabilityOutOfRange { index, value } => {
                write!(f, "p-value {value} at index {index} outside [0, 1]")
            }
            Error::InvalidK { k, n } => write!(f, "cluster count {k} invalid for {n} points"),
            Error::SingleCluster => write!(f, "need at least two clusters"),
            Error::DegenerateInput { reason } => write!(f, "degenerate input: {reason}"),
            Error::InvalidWeights { reason } => write!(f, "invalid weight vector: {reason}"),
            Error::DegenerateRegressor => write!(f, "regressor is identically zero"),
            Error::TooFewObservations { found, required } => {
                write!(f, "{found} observations, need at least {required}")
            }
            Error::InvalidConfig { reason } => write!(f, "invalid configuration: {reason}"),
        }
    }
}

impl core::error::Error for Error {}
