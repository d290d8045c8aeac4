use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] zakai_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad input, 3 for stability refusals, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(e) if e.is_stability_refusal() => 3,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(zakai_core::Error::EmptyPilot) => 4,
            CliError::Core(_) => 2,
        }
    }
}
