use std::path::PathBuf;

use botlstm_core::Error as CoreError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{module}: {source}")]
    Core {
        module: &'static str,
        #[source]
        source: CoreError,
    },
    #[error("{module}: {}: {source}", path.display())]
    CoreAt {
        module: &'static str,
        path: PathBuf,
        #[source]
        source: CoreError,
    },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// A core error raised while reading `path`.
    pub fn at(path: impl Into<PathBuf>, source: CoreError) -> Self {
        CliError::CoreAt {
            module: module_of(&source),
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
            CliError::Core { source, .. } | CliError::CoreAt { source, .. }
                if is_invariant(source) =>
            {
                EXIT_INTERNAL
            }
            _ => EXIT_DATA,
        }
    }
}

fn is_invariant(e: &CoreError) -> bool {
    matches!(e, CoreError::Shape(_) | CoreError::NonFinite(_))
}

fn module_of(e: &CoreError) -> &'static str {
    use CoreError::*;
    match e {
        DimensionMismatch { .. }
        | NotANumber { .. }
        | NonFiniteVector { .. }
        | EmptyEmbeddings
        | MissingVector(_) => "embeddings",
        TokenOutOfRange { .. } | InvalidVocabulary(_) => "text_pipeline",
        Shape(_) | NonFinite(_) | EmptySequence => "nn_core",
        Config(_) | EmptyDataset => "trainer",
        LengthMismatch { .. } | NoSamples => "metrics",
        DuplicateAccount(_)
        | UnknownAccounts(_)
        | UnknownLabel { .. }
        | NotEnoughAccounts { .. } => "datasets",
    }
}

impl From<CoreError> for CliError {
    fn from(source: CoreError) -> Self {
        CliError::Core {
            module: module_of(&source),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
