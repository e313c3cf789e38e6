use std::path::Path;

/// Failures of a command, each with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Compute(#[from] rotmcf_core::Error),
    /// Some acceptance criteria failed.
    #[error("{0} acceptance criteria failed")]
    Verify(usize),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    /// 1 for input and output problems, 2 for searches and numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } | Self::Config(_) => 1,
            Self::Compute(_) | Self::Verify(_) => 2,
        }
    }
}
