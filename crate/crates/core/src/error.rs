use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix has no rows")]
    EmptyMatrix,
    #[error("value buffer holds {found} elements, shape needs {expected}")]
    BufferLength { expected: usize, found: usize },
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("need at least {needed} rows, got {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("{which} mask has length {found}, expected {expected}")]
    MaskLength {
        which: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("query row {row} has every key masked")]
    FullyMaskedRow { row: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("transcript is empty")]
    EmptyTranscript,
    #[error("label list is empty")]
    EmptyLabels,
    #[error("cannot parse answer: {0}")]
    AnswerParse(String),
    #[error("audio has {len} samples, shorter than one {window}-sample window")]
    AudioTooShort { len: usize, window: usize },
    #[error("non-finite audio sample at index {0}")]
    NonFiniteSample(usize),
    #[error("cepstral order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },
    #[error("frame count mismatch without alignment: {left} vs {right}")]
    FrameCountMismatch { left: usize, right: usize },
    #[error("reference is empty after normalization")]
    EmptyReference,
    #[error("need at least 3 records to split, got {0}")]
    TooFewRecords(usize),
}
