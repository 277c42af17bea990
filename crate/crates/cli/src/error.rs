use calderon_core::Error as CoreError;

/// Process exit status: 0 success, 1 invalid input, 2 solver failure,
/// 3 a check (gradcheck) failed.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Core(e) => core_code(e),
            CliError::CheckFailed(_) => 3,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

fn core_code(e: &CoreError) -> i32 {
    match e {
        CoreError::NotConverged { .. } | CoreError::Indefinite { .. } | CoreError::Diverged { .. } => 2,
        CoreError::Measurement { source, .. } | CoreError::Descent { source, .. } => core_code(source),
        _ => 1,
    }
}
