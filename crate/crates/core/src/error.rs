use thiserror::Error;

/// Failures surfaced by the numerical routines.
///
/// Every message is prefixed with the `module::operation` that raised it so
/// that CLI users can tell which stage of a run went wrong.
#[derive(Debug, Error)]
pub enum HjError {
    #[error("{op}: unresolved hole: {detail}")]
    UnresolvedHole { op: &'static str, detail: String },

    #[error("{op}: unreachable time step: {detail}")]
    UnreachableTimeStep { op: &'static str, detail: String },

    #[error("{op}: invalid input: {detail}")]
    InvalidInput { op: &'static str, detail: String },

    #[error("{op}: unreachable: {detail}")]
    Unreachable { op: &'static str, detail: String },

    #[error("{op}: no anchor: {detail}")]
    NoAnchor { op: &'static str, detail: String },

    #[error("{op}: no convergence: {detail}")]
    NonConvergence { op: &'static str, detail: String },

    #[error("{op}: {source}")]
    Io {
        op: &'static str,
        #[source]
        source: std::io::Error,
    },

    #[error("{op}: {source}")]
    Csv {
        op: &'static str,
        #[source]
        source: csv::Error,
    },

    #[error("{op}: {source}")]
    Json {
        op: &'static str,
        #[source]
        source: serde_json::Error,
    },
}

impl HjError {
    /// True for errors caused by the configuration rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            HjError::UnresolvedHole { .. }
                | HjError::UnreachableTimeStep { .. }
                | HjError::InvalidInput { .. }
                | HjError::Json { .. }
        )
    }

    /// True for Unreachable / NoAnchor / NonConvergence.
    pub fn is_numerical_error(&self) -> bool {
        matches!(self, HjError::Unreachable { .. } | HjError::NoAnchor { .. } | HjError::NonConvergence { .. })
    }

    pub(crate) fn invalid(op: &'static str, detail: impl Into<String>) -> Self {
        HjError::InvalidInput { op, detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, HjError>;
