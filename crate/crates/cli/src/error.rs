use std::path::PathBuf;

use riemap_core::GeomError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unknown {kind} '{name}' referenced by {context}")]
    Reference { kind: &'static str, name: String, context: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("in {context}: {source}")]
    Geometry { context: String, source: GeomError },
    #[error("unknown scenario '{0}' (not a file and not a builtin)")]
    UnknownScenario(String),
}

impl CliError {
    pub fn reference(kind: &'static str, name: &str, context: &str) -> Self {
        CliError::Reference { kind, name: name.to_string(), context: context.to_string() }
    }

    pub fn geometry(context: impl Into<String>) -> impl FnOnce(GeomError) -> Self {
        let context = context.into();
        move |source| CliError::Geometry { context, source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
