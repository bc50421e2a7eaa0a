use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: u32, message: String },

    #[error("symbol `{0}` not found in codebase")]
    SymbolNotFound(String),

    #[error("context of {lines} lines exceeds the budget of {budget} lines")]
    ContextBudgetExceeded { lines: usize, budget: usize },

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("replay fixture has no completion for prompt {key}")]
    FixtureMiss { key: String },

    #[error("compiler executable `{0}` not found")]
    ToolchainMissing(String),

    #[error("scratch crate generation failed: {0}")]
    Scaffold(String),

    #[error("no fallback translation stored for {0}")]
    FallbackMissing(String),

    #[error("conflicting definitions of `{name}`")]
    ConflictingDefinition { name: String },

    #[error("rust source does not parse: {0}")]
    ParseFailed(String),

    #[error("metric input is empty")]
    EmptyInput,

    #[error("length mismatch: {left} verdicts vs {right} line counts")]
    LengthMismatch { left: usize, right: usize },

    #[error("missing prerequisite artifact {0}")]
    MissingPrerequisite(PathBuf),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid catalog: {0}")]
    Catalog(String),

    #[error("unsupported construct for the naive transpiler: {0}")]
    Unsupported(String),

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
