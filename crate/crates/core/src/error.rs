use thiserror::Error;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent user input.
    Input,
    /// Numerical failure such as a rank-deficient fit.
    Numeric,
    /// A geometric precondition does not hold for the given case.
    Domain,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing key `{0}`")]
    MissingKey(String),

    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("{op}: {reason}")]
    Domain { op: &'static str, reason: String },

    #[error("layer factor {lf} is below the attainable minimum {min}")]
    NoSolution { lf: f64, min: f64 },

    #[error("chord extremes are degenerate (half-length {half_length})")]
    DegenerateChord { half_length: f64 },

    #[error("MLO extremes coincide (distance {distance})")]
    DegenerateExtremes { distance: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Validation { .. }
            | Error::Parse { .. }
            | Error::MissingKey(_)
            | Error::Io(_) => ErrorKind::Input,
            Error::Singular(_) => ErrorKind::Numeric,
            Error::Domain { .. }
            | Error::NoSolution { .. }
            | Error::DegenerateChord { .. }
            | Error::DegenerateExtremes { .. } => ErrorKind::Domain,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
