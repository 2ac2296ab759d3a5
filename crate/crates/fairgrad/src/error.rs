//! Error type shared by every module in the crate.

use thiserror::Error;

/// Errors produced by solvers, aggregators, and diagnostics.
#[derive(Error, Debug)]
pub enum FairGradError {
    /// Structurally invalid input: shape mismatch, non-finite entries,
    /// or an argument outside its documented range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Mathematically undefined request, e.g. a log of a nonpositive loss.
    #[error("domain error: {0}")]
    Domain(String),

    /// A combination of settings the method does not define.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Configuration validation failure; names the offending field.
    #[error("config error: field `{field}`: {message}")]
    Config { field: &'static str, message: String },

    /// Text input (config file or metric table) that does not parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Non-finite loss or gradient encountered mid-run; carries the step index.
    #[error("non-finite value at step {step}: {context}")]
    NonFinite { step: usize, context: String },
}

pub type Result<T> = std::result::Result<T, FairGradError>;
