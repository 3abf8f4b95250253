//! The type-directed compiler: security lattices, register records, and the
//! expression and command rules that emit RISC code with an annotation.

mod compile;
mod lattice;
mod record;

pub use compile::{
    compile_cmd, compile_expr, compile_program, while_record, CompileError, CompileOptions, CompiledCmd, CompiledExpr,
    CompiledProgram, IfHSite, Rule, TypeError, TypeErrorKind,
};
pub use lattice::{term_of, write_of, CmdAnnotation, Level, Timing, WriteEffect};
pub use record::RegisterRecord;
