use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(frontlab::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(3),
            CliError::Io { .. } => ExitCode::from(1),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.as_ref().display().to_string();
        move |source| CliError::Io { path, source }
    }
}

impl From<frontlab::Error> for CliError {
    fn from(e: frontlab::Error) -> Self {
        use frontlab::Error as E;
        match e {
            E::OutOfRange { .. }
            | E::InvalidNonlinearity(_)
            | E::UnknownStrategy { .. }
            | E::Config(_)
            | E::WindowTooShort(_) => CliError::Config(e.to_string()),
            E::ConnectionFailure { .. }
            | E::NoBracket { .. }
            | E::Integration(_)
            | E::Truncation { .. }
            | E::Numerical { .. }
            | E::ParticleCap { .. } => CliError::Numerical(e),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io {
            path: "csv output".into(),
            source: e.into(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
