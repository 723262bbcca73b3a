use std::io;

use thiserror::Error;

/// Errors produced by tree construction, data loading, scoring and search.
#[derive(Error, Debug)]
pub enum HcError {
    /// An argument is outside the domain an operation accepts.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A merge sequence does not describe a full agglomeration.
    #[error("malformed merge sequence: {0}")]
    MalformedMerges(String),

    /// Tree text could not be parsed.
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    /// Leaf labels in a tree are not a permutation of `1..=n`.
    #[error("invalid leaf labels: {0}")]
    Labels(String),

    /// Tree and similarity matrix disagree on the number of points.
    #[error("size mismatch: tree has {tree} leaves but the matrix has {matrix} points")]
    SizeMismatch { tree: usize, matrix: usize },

    /// A delimited data file failed validation.
    #[error("dataset error at row {row}, column {column}: {message}")]
    Dataset {
        row: usize,
        column: usize,
        message: String,
    },

    /// Input data is degenerate for the requested operation.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Binary matrix file is not in the expected format.
    #[error("matrix format error: {0}")]
    Format(String),

    /// Normalized revenue is undefined for n <= 2 or zero total weight.
    #[error("normalized revenue is undefined (n = {n}, total weight = {total_weight})")]
    UndefinedNormalization { n: usize, total_weight: f64 },

    /// An interchange move no longer matches the tree it was generated against.
    #[error("stale interchange move at node {0}")]
    StaleMove(usize),

    /// A structural invariant was found broken.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl HcError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HcError::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, HcError>;
