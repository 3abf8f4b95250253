//! Fault-prone systems over bit-valued locations, probabilistic fault
//! environments, and the composed and augmented semantics built from them.

mod compose;
mod env;
mod state;

pub use compose::{
    augmented_step, augmented_step_with, compose_step, termination_transparent_step, trace_distribution,
    trace_probability, ComposedStep, FaultProneSystem, TableSystem,
};
pub use env::{uniform_environment, Advance, Environment, ScriptedAdversary};
pub use state::{flip, flip_unchecked, powerset, Action, BitState, Channel, FaultSet, Layout, Location, Tolerance};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FaultError {
    #[error("duplicate location `{0}`")]
    DuplicateLocation(String),
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("location `{0}` is fault-tolerant and cannot be flipped")]
    TolerantLocation(String),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
