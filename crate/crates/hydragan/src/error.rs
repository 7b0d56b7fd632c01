use std::path::PathBuf;

/// Failure of a command, grouped by the process exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("numeric divergence: {0}")]
    Divergence(String),
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 config, 3 data or checkpoint, 4 NaN/inf during training, 1 output IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Checkpoint(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::Output { .. } => 1,
        }
    }

    pub(crate) fn output(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.into(),
            source,
        }
    }
}

/// Library errors raised while processing input data; divergence keeps its
/// own exit code.
impl From<hydragan_core::Error> for CliError {
    fn from(e: hydragan_core::Error) -> Self {
        match e {
            hydragan_core::Error::NonFinite(msg) => CliError::Divergence(msg),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
