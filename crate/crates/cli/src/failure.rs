use std::fmt;
use std::path::{Path, PathBuf};

/// Why a command stopped, mapped onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(lqbe_core::Error),
    Io { path: PathBuf, source: std::io::Error },
    Acceptance { failed: usize, total: usize },
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io { .. } => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Acceptance { .. } => 4,
        }
    }

    pub fn config(e: impl fmt::Display) -> Self {
        Failure::Config(e.to_string())
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| Failure::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(msg) => write!(f, "config error: {msg}"),
            Failure::Numerical(e) => write!(f, "numerical failure: {e}"),
            Failure::Io { path, source } => write!(f, "I/O error on {}: {source}", path.display()),
            Failure::Acceptance { failed, total } => write!(f, "{failed} of {total} acceptance criteria failed"),
        }
    }
}

impl From<lqbe_core::Error> for Failure {
    fn from(e: lqbe_core::Error) -> Self {
        Failure::Numerical(e)
    }
}

pub type CliResult<T> = Result<T, Failure>;
