use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate element `{0}` in scored list")]
    DuplicateElement(String),

    #[error("score for `{element}` is not a valid suspiciousness value: {score}")]
    InvalidScore { element: String, score: f64 },

    #[error("element `{0}` has no enclosing method")]
    MissingMethod(String),

    #[error("invalid element id `{0}` (expected file:line:index)")]
    InvalidElementId(String),

    #[error("ground truth is empty after patch adjustment")]
    EmptyGroundTruth,

    #[error("fault case `{0}` is invalid: {1}")]
    InvalidFaultCase(String, String),

    #[error("no faulty element appears in the ranking")]
    FaultNotRanked,

    #[error("correlation is undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: u32, column: u32, message: String },

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("spectrum requires at least one failed test")]
    NoFailedTests,

    #[error("missing execution for mutant `{mutant}` on test `{test}`")]
    MissingMutantRun { mutant: String, test: String },

    #[error("feature dimension mismatch: model has {expected}, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("missing technique data for families: {0:?}")]
    MissingFamilies(Vec<String>),

    #[error("cross-validation needs {needed} groups, found {found}")]
    NotEnoughFolds { needed: usize, found: usize },

    #[error("bug report contains no searchable tokens")]
    EmptyReport,

    #[error("history timestamps decrease at commit {0}")]
    UnorderedHistory(usize),

    #[error("thread pool: {0}")]
    ThreadPool(String),

    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("missing input: {0:?}")]
    MissingInputs(Vec<String>),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
