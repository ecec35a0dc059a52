use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Invalid configuration; `field` names the offending entry.
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] mlbfgs_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Rate check requested with a step size whose contraction factor is not below one.
    #[error("step size {eta} gives alpha = {alpha} >= 1; largest admissible step is {eta_max}")]
    Inadmissible { eta: f64, alpha: f64, eta_max: f64 },
}

impl HarnessError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Configuration problems map to exit code 1.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Self::Config { .. } | Self::Parse(_) | Self::Inadmissible { .. }
        ) || matches!(
            self,
            Self::Core(mlbfgs_core::Error::InvalidArgument { .. })
                | Self::Core(mlbfgs_core::Error::InvalidLayout(_))
                | Self::Core(mlbfgs_core::Error::MissingInputs(_))
                | Self::Core(mlbfgs_core::Error::Parse { .. })
        )
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
