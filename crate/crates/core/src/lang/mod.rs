//! The source language: expressions over words, assignment, conditionals,
//! outputs, sequencing, and loops guarded by a variable.

mod ast;
mod interp;
mod parse;

pub use ast::{Cmd, Expr, Guard, SourceProgram};
pub use interp::{eval_expr, run_while, step_in_place, step_while, WhileMemory, WhileRun};
pub use parse::{parse, parse_with, ParseOptions};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LangError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: variable `{name}` is not declared")]
    Undeclared { name: String, line: usize, col: usize },
    #[error("{line}:{col}: variable `{name}` is declared twice")]
    Duplicate { name: String, line: usize, col: usize },
    #[error("variable `{0}` has no value in memory")]
    Unbound(String),
}

impl LangError {
    fn unbound(x: &str) -> Self {
        LangError::Unbound(x.to_string())
    }
}
