use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}: row {row}, column {column}: {message}")]
    MatrixParse {
        source_name: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("newick parse error at byte {position}: {message}")]
    Newick { position: usize, message: String },

    #[error("parameter file, line {line}: {message}")]
    ParamsParse { line: usize, message: String },

    #[error("unknown taxon `{0}`")]
    UnknownTaxon(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("no complete features among the selected taxa")]
    NoCompleteFeatures,

    #[error("no usable features for pair ({0}, {1})")]
    NoUsableFeatures(String, String),

    #[error("state absent in taxon: joint count matrix has a zero row or column sum")]
    StateAbsent,

    #[error("distance undefined for pair ({0}, {1}): {2}")]
    PairDistance(String, String, Box<Error>),

    #[error("no discriminating or shared-positive features for pair ({0}, {1})")]
    NoJaccardSupport(String, String),

    #[error("non-finite distance between `{0}` and `{1}`")]
    NonFinite(String, String),

    #[error("singular matrix")]
    Singular,

    #[error("leaf sets differ: only in first {only_first:?}, only in second {only_second:?}")]
    LeafSetMismatch {
        only_first: Vec<String>,
        only_second: Vec<String>,
    },

    #[error("pattern space of {0} entries exceeds the configured cap of {1}")]
    TensorTooLarge(u128, usize),

    #[error("all null batches are non-finite for `{0}`")]
    AllBatchesNonFinite(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("cannot read {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
