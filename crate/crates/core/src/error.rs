use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("agents {0} and {1} have coincident centers")]
    CoincidentCenters(usize, usize),
    #[error("pair geometry is degenerate: zero center distance")]
    DegeneratePair,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("controller `{controller}` does not support {dynamics} dynamics")]
    UnsupportedCombination {
        controller: &'static str,
        dynamics: &'static str,
    },
}

impl ConfigError {
    pub(crate) fn field(field: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::InvalidField {
            field,
            reason: reason.into(),
        }
    }
}
