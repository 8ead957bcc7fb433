use kelab_core::Error as CoreError;

/// Failures of a run, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Bad configuration or arguments; nothing was computed. Exit code 2.
    #[error("{0}")]
    Validation(String),
    /// The computation itself failed. Exit code 3.
    #[error("{0}")]
    Computation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Validation(_) => 2,
            LabError::Computation(_) | LabError::Io(_) => 3,
        }
    }

    /// Message on one line, as printed to stderr.
    pub fn reason(&self) -> String {
        self.to_string().replace('\n', " ")
    }
}

/// Input errors map to validation failures, everything else to computation failures.
impl From<CoreError> for LabError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonKlt(_)
            | CoreError::InvalidInput(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::OracleOnly(_)
            | CoreError::NonReflexive(_) => LabError::Validation(e.to_string()),
            _ => LabError::Computation(e.to_string()),
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
