use std::io;
use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("artifact error: {0}")]
    Artifact(String),
    #[error("unsupported artifact format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u64, supported: u64 },
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: fraudlab_core::Error,
    },
    #[error("expert parameters changed during gate training in fold {fold}")]
    FreezeViolation { fold: usize },
    #[error(transparent)]
    Core(#[from] fraudlab_core::Error),
}

impl Error {
    pub(crate) fn io(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
        move |source| Error::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn data(msg: impl std::fmt::Display) -> Error {
        Error::Data(msg.to_string())
    }

    /// Process exit code: 2 for configuration problems, 4 for training
    /// failures, 3 for everything touching data, files or artifacts.
    pub fn exit_code(&self) -> i32 {
        use fraudlab_core::Error as Core;
        match self {
            Error::Config(_) => 2,
            Error::Fold { source: Core::Diverged { .. }, .. }
            | Error::Core(Core::Diverged { .. })
            | Error::FreezeViolation { .. } => 4,
            _ => 3,
        }
    }
}
