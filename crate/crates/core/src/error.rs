use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("ragged rows: line {line} has {found} columns, expected {expected}")]
    RaggedRows {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("mixed labeled and unlabeled rows (line {line})")]
    MixedLabels { line: usize },

    #[error("bad magic: expected \"MDAF\", found {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported MDAF version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("declared sizes overflow: n={n}, d={d}")]
    SizeOverflow { n: u64, d: u64 },

    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("class-count mismatch: source C={source_classes}, target C={target_classes}")]
    ClassCountMismatch {
        source_classes: usize,
        target_classes: usize,
    },

    #[error("source labels required")]
    MissingSourceLabels,

    #[error("labels required for {0}")]
    MissingLabels(&'static str),

    #[error("label {label} outside 1..={classes}")]
    LabelOutOfRange { label: i64, classes: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular linear system")]
    Singular,

    #[error("cut-locus input: P^T Q is singular")]
    CutLocus,

    #[error("antipodal points have no unique geodesic")]
    Antipodal,

    #[error("degenerate shape (zero scatter)")]
    DegenerateShape,

    #[error("config error: {0}")]
    Config(String),

    #[error("missing feature files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles(Vec<PathBuf>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
