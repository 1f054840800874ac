use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants map onto CLI exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix pencil is singular: {0}")]
    SingularPencil(String),

    #[error("invalid cluster count k={k} for n={n}")]
    InvalidK { k: usize, n: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("graph is disconnected: {reached} of {n} nodes reachable from node 0")]
    DisconnectedGraph { reached: usize, n: usize },

    #[error("node {0} has zero degree")]
    IsolatedNode(usize),

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("need at least 2 labeled nodes, got {0}")]
    InsufficientLabels(usize),

    #[error("requested {requested} constraint pairs but only {available} are available")]
    InsufficientPairs { requested: usize, available: usize },

    #[error(
        "beta = {beta} is not below the admissible bound {bound} \
         (= {eigenvalue:.4}·vol with vol = {vol})"
    )]
    BetaOutOfRange {
        beta: f64,
        bound: f64,
        eigenvalue: f64,
        vol: f64,
    },

    #[error(
        "no feasible cut (needed {needed}; filtered: {filtered_complex} complex, \
         {filtered_nonpositive} non-positive, {filtered_infinite} infinite, {filtered_trivial} trivial)"
    )]
    NoFeasibleCut {
        needed: usize,
        found: usize,
        filtered_complex: usize,
        filtered_nonpositive: usize,
        filtered_infinite: usize,
        filtered_trivial: usize,
    },

    #[error("cost weighting matrix VᵀL̄V is singular")]
    SingularWeighting,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoFeasibleCut { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
