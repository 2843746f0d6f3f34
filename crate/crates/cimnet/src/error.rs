use std::fmt;
use std::path::Path;

/// A malformed input document, anchored to a position.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: String,
    /// 1-based; 0 when unknown.
    pub line: usize,
    pub column: usize,
    /// Dotted path of the offending field, when known.
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn field(origin: &str, line: usize, field: &str, message: impl Into<String>) -> Self {
        ConfigError {
            origin: origin.to_string(),
            line,
            column: 0,
            field: Some(field.to_string()),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.origin)?;
        if self.line > 0 {
            write!(f, ":{}", self.line)?;
            if self.column > 0 {
                write!(f, ":{}", self.column)?;
            }
        }
        write!(f, ": ")?;
        if let Some(field) = &self.field {
            write!(f, "field `{field}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The configured space admits nothing to evaluate.
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Infeasible(_) => 3,
            Error::Io { .. } | Error::Other(_) => 1,
        }
    }
}
