use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ShellError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] vesicle_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, ShellError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;
pub const EXIT_HYPOTHESIS: i32 = 4;
pub const EXIT_VERIFICATION: i32 = 5;

impl ShellError {
    pub fn exit_code(&self) -> i32 {
        use vesicle_core::Error as E;
        match self {
            ShellError::Config(_) | ShellError::Snapshot { .. } => EXIT_CONFIG,
            ShellError::Verification(_) => EXIT_VERIFICATION,
            ShellError::Io { .. } => EXIT_RUNTIME,
            ShellError::Core(e) => match e {
                E::BlowUp { .. } | E::NonFinite { .. } => EXIT_BLOW_UP,
                E::TraceClass(_) => EXIT_HYPOTHESIS,
                E::InvalidParameter(_)
                | E::InvalidDomain(_)
                | E::Stability(_)
                | E::Dealiasing { .. }
                | E::ModeIndex { .. }
                | E::Shape { .. } => EXIT_CONFIG,
                _ => EXIT_RUNTIME,
            },
        }
    }
}

pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> ShellError {
    let path = path.into();
    move |source| ShellError::Io { path, source }
}
