//! A security-typed compiler from a small while language to a RISC-style
//! assembly, together with exhaustive checkers for noninterference under
//! transient bit-flip faults.
//!
//! - [`faultlab`]: fault-prone systems, fault environments, composed and augmented semantics.
//! - [`machine`]: the RISC machine, its assembler, and its bit-level encoding.
//! - [`lang`]: the while language: parser, printer, interpreter.
//! - [`seccomp`]: the type-directed compiler.
//! - [`verify`]: checkers for strong security, possibilistic and probabilistic noninterference.

pub mod cli;
pub mod corpus;
pub mod faultlab;
pub mod gen;
pub mod lang;
pub mod machine;
pub mod seccomp;
pub mod verify;
