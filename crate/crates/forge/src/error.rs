use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ForgeError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}:{line}: field `{field}`: {message}")]
    Manifest { path: PathBuf, line: usize, field: String, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] forge_core::Error),
    #[error("transport error after {attempts} attempt(s){}: {message}", status.map(|s| format!(" (last status {s})")).unwrap_or_default())]
    Transport { attempts: u32, status: Option<u16>, message: String },
    #[error("endpoint returned status {status}: {body}")]
    Protocol { status: u16, body: String },
    #[error("internal: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, ForgeError>;

impl ForgeError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> ForgeError {
        let path = path.into();
        move |source| ForgeError::Io { path, source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> ForgeError {
        ForgeError::Format { path: path.into(), message: message.into() }
    }

    /// Process exit code: 2 config/manifest, 3 transport, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            ForgeError::Transport { .. } | ForgeError::Protocol { .. } => 3,
            ForgeError::Internal(_) => 4,
            _ => 2,
        }
    }
}
