use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The temporal variance of a 4D Gaussian is too small to condition on.
    #[error("degenerate temporal variance {0:e}")]
    DegenerateTemporal(f64),

    #[error("degenerate spatial rotation block (max singular value {0:e})")]
    DegenerateRotation(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported checkpoint version {found} (this build reads {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("integrity error in section `{section}`: {reason}")]
    Integrity { section: String, reason: String },

    #[error("numeric abort at iteration {iteration}: {reason}")]
    NumericAbort { iteration: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericAbort { .. } | Error::DegenerateTemporal(_) | Error::NotPsd(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::invalid("x").exit_code(), 2);
        assert_eq!(Error::format("x").exit_code(), 2);
        assert_eq!(Error::Integrity { section: "STAT".into(), reason: "crc".into() }.exit_code(), 2);
        assert_eq!(Error::NumericAbort { iteration: 3, reason: "nan".into() }.exit_code(), 3);
        assert_eq!(Error::NotPsd(-1.0).exit_code(), 3);
    }
}
