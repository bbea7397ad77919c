use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A sink failed part-way through; `written` bytes reached it.
    #[error("write failed after {written} bytes: {source}")]
    Write {
        written: u64,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("unknown device id {id}; valid ids: {valid:?}")]
    UnknownDevice { id: usize, valid: Vec<usize> },
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for the CLI: 1 input/format, 2 config, 3 consistency.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Write { .. } | Error::Format(_) => 1,
            Error::Config(_) | Error::UnknownDevice { .. } => 2,
            Error::Consistency(_) => 3,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
