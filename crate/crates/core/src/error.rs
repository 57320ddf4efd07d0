use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("app `{0}` appears in more than one split list")]
    SplitOverlap(String),

    #[error("{} app(s) not covered by any split list (first: `{}`)", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    SplitCoverage(Vec<String>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("featurization error at {path}: {message}")]
    Featurize { path: String, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for {what} of size {size}")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("sequence length {len} exceeds the maximum of {max}")]
    Length { len: usize, max: usize },

    #[error("numeric fault (non-finite value) in {0}")]
    Numeric(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("missing predictions for {} screen(s): {}", .0.len(), .0.join(", "))]
    Coverage(Vec<String>),
}
