//! Surface language: syntax tree, parser, and validation.

pub mod ast;
mod parser;
mod validate;

pub use ast::*;
pub use parser::{parse_fact, parse_program, ParseError};
pub use validate::{desugar, relation_arities, validate, CheckedProgram, ValidateError};
