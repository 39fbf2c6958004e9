//! Scalar expressions in chart coordinates with exact differentiation.

mod expr;
mod parse;

pub use expr::{DomainError, Expr, Node};
pub use parse::{parse, ExprParseError, SymbolTable};
