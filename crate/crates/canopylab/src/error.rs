//! Crate-wide error type and result alias.

use thiserror::Error;

/// Everything that can go wrong across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Structurally broken input (bad magic, inconsistent header, ...).
    #[error("malformed {context}: {detail}")]
    Malformed {
        context: &'static str,
        detail: String,
    },

    /// Input is recognized but uses a feature this crate does not decode.
    #[error("unsupported {what}")]
    Unsupported { what: String },

    /// Input ended before the header-promised length.
    #[error("truncated input at byte {offset}: {needed} more bytes expected")]
    Truncated { offset: usize, needed: usize },

    /// Text input failed to parse at a specific line (1-based).
    #[error("line {line}: {msg}")]
    ParseLine { line: usize, msg: String },

    /// Rule expression syntax error at a byte position in the rule text.
    #[error("rule syntax error at offset {pos}: {msg}")]
    RuleSyntax { pos: usize, msg: String },

    /// Rule references a layer outside the statistics vocabulary.
    #[error("unknown layer `{name}`")]
    UnknownLayer { name: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("out of range: {msg}")]
    OutOfRange { msg: String },

    /// Source and target grids share no area.
    #[error("grids do not overlap")]
    NoOverlap,

    /// Operands must share one grid geometry.
    #[error("grid mismatch: {msg}")]
    GridMismatch { msg: String },

    /// Wrong band count or a missing named band.
    #[error("band mismatch: {msg}")]
    BandMismatch { msg: String },

    /// A training class has no valid cells to sample from.
    #[error("class `{class}` has no valid cells")]
    InsufficientClass { class: &'static str },

    #[error("invalid parameter `{name}`: {msg}")]
    InvalidParameter { name: &'static str, msg: String },

    /// Relative change against a zero-tree baseline is refused, not infinite.
    #[error("baseline tree area is zero; relative change undefined")]
    UndefinedBaseline,

    /// Non-finite values or a failed numeric procedure.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A postcondition this crate promises was violated. Should not occur.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    /// Run-manifest parse or validation failure (1-based line, 0 = whole file).
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },

    /// A pipeline stage failed; carries the stage name and the underlying error.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
