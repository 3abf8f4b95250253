//! The RISC machine: instruction set, fault-free semantics, assembly text,
//! and the bit-level encoding that makes a program a fault-prone system.

mod asm;
mod encode;
mod exec;
mod isa;

pub use asm::{assemble, disassemble};
pub use encode::{mem_bit_name, reg_bit_name, RiscSystem};
pub use exec::{channel_level, run, signed_le_zero, step, step_in_place, MachineConfig, MachineState, MAX_WIDTH};
pub use isa::{BinOp, Body, Instruction, Program, Reg};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MachineError {
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("duplicate label `{label}`{}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    DuplicateLabel { label: String, line: Option<usize> },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("configuration: {0}")]
    Config(String),
}
