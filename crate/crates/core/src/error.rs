use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Dimensions or lengths do not agree.
    #[error("shape error: {0}")]
    Shape(String),

    /// The objective returned a non-finite value at an initial point.
    #[error("initialization error: objective is {value} at {point:?}")]
    Init { point: Vec<f64>, value: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
