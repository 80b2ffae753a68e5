//! Parsing, type checking, evaluation and bounded solving for a subset of
//! the Alloy language.

pub mod ast;
pub mod commands;
pub mod error;
pub mod lexer;
pub mod parser;
pub mod render;
pub mod semantics;
pub mod solver;
pub mod typeck;

pub use ast::*;
pub use commands::{extract_commands, RawCommand};
pub use error::{ErrorKind, ParseError, TypeError};
pub use parser::{
    parse_command, parse_command_syntax, parse_expr_syntax, parse_formula, parse_formula_syntax, parse_model,
    parse_model_syntax, parse_predicates,
};
