//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("mode {mode} out of range for a {ndim}-way tensor (modes are 1-based)")]
    ModeOutOfRange { mode: usize, ndim: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid cores: {0}")]
    InvalidCores(String),

    #[error("mask entries must be exactly 0 or 1")]
    InvalidMask,

    #[error("no observed entries")]
    NoObservations,

    #[error("non-finite value among observed entries")]
    NonFinite,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T> = std::result::Result<T, Error>;
