use thiserror::Error;

/// Errors produced by model construction, queries and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("observed mass f({cell}, {pattern}) = {mass} is not strictly positive")]
    PositivityViolation {
        pattern: String,
        cell: String,
        mass: f64,
    },

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("conditional undefined: neither {with_item} nor {without_item} is a realizable pattern")]
    UndefinedConditional {
        with_item: String,
        without_item: String,
    },

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("cannot fit density for pattern {pattern}: {reason}")]
    Fit { pattern: String, reason: String },

    #[error("quadrature failed: {0}; try a tighter grid")]
    Quadrature(String),

    #[error("point {point} lies outside the quadrature grid [{lo}, {hi}]")]
    Extrapolation { point: f64, lo: f64, hi: f64 },

    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("infeasible: {message} (offending mass {mass})")]
    Infeasible { message: String, mass: f64 },

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("input: {0}")]
    Input(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse error families, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Numeric,
    Infeasible,
    Other,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Input => 2,
            ErrorCategory::Numeric => 3,
            ErrorCategory::Infeasible => 4,
            ErrorCategory::Other => 1,
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            InvalidArgument(_) | PositivityViolation { .. } | UndefinedConditional { .. }
            | UnsupportedSize(_) | DegenerateSample(_) | Fit { .. } | Row { .. } | Input(_)
            | Json(_) | Csv(_) | Extrapolation { .. } => ErrorCategory::Input,
            NumericOverflow(_) | Quadrature(_) | Invariant(_) => ErrorCategory::Numeric,
            Degenerate(_) | Infeasible { .. } => ErrorCategory::Infeasible,
            Io(_) => ErrorCategory::Other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
