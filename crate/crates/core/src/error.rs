use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Lexical,
    Syntactic,
    Resolution,
    Arity,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Lexical => "lexical",
            ErrorKind::Syntactic => "syntax",
            ErrorKind::Resolution => "resolution",
            ErrorKind::Arity => "arity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{kind} error at {span}: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub kind: ErrorKind,
}

impl ParseError {
    pub fn new(kind: ErrorKind, span: SourceSpan, message: impl Into<String>) -> ParseError {
        ParseError { span, message: message.into(), kind }
    }
}

/// Type error raised while resolving or checking an expression.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("operator `{op}` cannot combine arities {left} and {right}")]
    ArityMismatch { op: String, left: usize, right: usize },
    #[error("`{op}` requires {expected}, found arity {found}")]
    BadArity { op: String, expected: String, found: usize },
    #[error("`{0}` is ambiguous; disambiguate with `<:`")]
    Ambiguous(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("{0}")]
    Other(String),
}

impl TypeError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            TypeError::ArityMismatch { .. } | TypeError::BadArity { .. } => ErrorKind::Arity,
            _ => ErrorKind::Resolution,
        }
    }

    pub fn at(self, span: SourceSpan) -> ParseError {
        ParseError::new(self.kind(), span, self.to_string())
    }
}
