use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {}: {source}", path.display())]
    Input {
        path: PathBuf,
        #[source]
        source: rift_core::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] rift_core::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_USER: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

fn core_exit_code(e: &rift_core::Error) -> u8 {
    use rift_core::Error as E;
    match e {
        E::InvalidGeometry(_)
        | E::InvalidScenario(_)
        | E::InvalidConfig(_)
        | E::ConfigMismatch(_)
        | E::EmptyInput(_)
        | E::Parse(_)
        | E::Json(_)
        | E::Csv(_) => EXIT_USER,
        E::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_USER,
        E::Iteration { source, .. } => core_exit_code(source),
        _ => EXIT_RUNTIME,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Input { .. } => EXIT_USER,
            CliError::Output { .. } => EXIT_RUNTIME,
            CliError::Core(e) => core_exit_code(e),
        }
    }

    pub fn input(path: impl Into<PathBuf>, source: impl Into<rift_core::Error>) -> Self {
        CliError::Input {
            path: path.into(),
            source: source.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        let wrapped = rift_core::Error::Iteration {
            iteration: 3,
            source: Box::new(rift_core::Error::PartialBuffer {
                filled: 1,
                capacity: 2,
            }),
        };
        assert_eq!(CliError::Core(wrapped).exit_code(), 3);
        let cfg = rift_core::Error::Iteration {
            iteration: 0,
            source: Box::new(rift_core::Error::InvalidConfig("bad".into())),
        };
        assert_eq!(CliError::Core(cfg).exit_code(), 2);
    }
}
