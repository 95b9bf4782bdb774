use std::io;

use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad magic bytes, unknown version or unparsable header.
    #[error("format error: {0}")]
    Format(String),
    /// Header and payload disagree.
    #[error("corrupt data: {0}")]
    Corrupt(String),
    /// Data violates a value invariant (non-finite scalars and the like).
    #[error("invalid value: {0}")]
    Value(String),
    /// A caller supplied an argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A documented calling contract was broken.
    #[error("contract violation: {0}")]
    Contract(String),
    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    Divergence(String),
    /// A quantity is mathematically undefined for the given input.
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Wraps an I/O failure with the path involved.
    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::$variant(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
