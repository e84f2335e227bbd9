use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or model field failed validation. `path` names the
    /// offending field, e.g. `layers[0].alpha`.
    #[error("invalid value at `{path}`: {reason}")]
    Invalid { path: String, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite integrand value {value} at node {node:?}")]
    NonFinite { node: Vec<f64>, value: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An optimum landed on an artificial truncation (a cap on z1 or y2),
    /// so the truncated problem cannot be trusted to equal the original.
    #[error("optimum touches truncation cap: {0}")]
    Truncation(String),

    #[error("{what} did not converge (best residual {best_residual:e})")]
    NonConvergence { what: String, best_residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for process exit codes and machine-readable
/// error reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCategory {
    Config,
    Numeric,
    NonConvergence,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Numeric => 3,
            ErrorCategory::NonConvergence => 4,
        }
    }
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Invalid { .. }
            | Error::Precondition(_)
            | Error::Unsupported(_)
            | Error::Io(_)
            | Error::Json(_) => ErrorCategory::Config,
            Error::NonFinite { .. } | Error::Numeric(_) | Error::Truncation(_) | Error::Csv(_) => {
                ErrorCategory::Numeric
            }
            Error::NonConvergence { .. } => ErrorCategory::NonConvergence,
        }
    }

    /// Prefixes the field path of an `Invalid` error, so nested validators
    /// can report `model.layers[0].alpha` instead of `alpha`.
    pub(crate) fn within(self, prefix: &str) -> Self {
        match self {
            Error::Invalid { path, reason } => Error::Invalid {
                path: if path.is_empty() {
                    prefix.to_string()
                } else if path.starts_with('[') {
                    format!("{prefix}{path}")
                } else {
                    format!("{prefix}.{path}")
                },
                reason,
            },
            other => other,
        }
    }
}
