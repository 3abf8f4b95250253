use std::collections::HashMap;
use std::fmt;

use crate::faultlab::Channel;

use super::MachineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg(pub usize);

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    And,
}

impl BinOp {
    pub fn mnemonic(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::And => "and",
        }
    }

    /// Applies the operator modulo `mask + 1`.
    pub fn apply(self, a: u64, b: u64, mask: u64) -> u64 {
        (match self {
            BinOp::Add => a.wrapping_add(b),
            BinOp::Sub => a.wrapping_sub(b),
            BinOp::Mul => a.wrapping_mul(b),
            BinOp::And => a & b,
        }) & mask
    }
}

/// An instruction body, without its label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Body {
    Load {
        dst: Reg,
        addr: u64,
    },
    Store {
        addr: u64,
        src: Reg,
    },
    Jmp(String),
    Jz(String, Reg),
    Nop,
    Movek(Reg, u64),
    Mover(Reg, Reg),
    Op(BinOp, Reg, Reg),
    Out(Channel, Reg),
    /// Jump when the register, read as two's complement, is at most zero.
    Jlez(String, Reg),
}

impl Body {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            Body::Load { .. } => "load",
            Body::Store { .. } => "store",
            Body::Jmp(_) => "jmp",
            Body::Jz(..) => "jz",
            Body::Nop => "nop",
            Body::Movek(..) => "movek",
            Body::Mover(..) => "mover",
            Body::Op(op, ..) => op.mnemonic(),
            Body::Out(..) => "out",
            Body::Jlez(..) => "jlez",
        }
    }

    pub fn target(&self) -> Option<&str> {
        match self {
            Body::Jmp(l) | Body::Jz(l, _) | Body::Jlez(l, _) => Some(l),
            _ => None,
        }
    }

    pub fn registers(&self) -> Vec<Reg> {
        match *self {
            Body::Load { dst, .. } => vec![dst],
            Body::Store { src, .. } => vec![src],
            Body::Jz(_, r) | Body::Jlez(_, r) | Body::Movek(r, _) | Body::Out(_, r) => vec![r],
            Body::Mover(a, b) | Body::Op(_, a, b) => vec![a, b],
            Body::Jmp(_) | Body::Nop => vec![],
        }
    }

    pub fn address(&self) -> Option<u64> {
        match *self {
            Body::Load { addr, .. } | Body::Store { addr, .. } => Some(addr),
            _ => None,
        }
    }
}

impl fmt::Display for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Body::Load { dst, addr } => write!(f, "load {dst} {addr}"),
            Body::Store { addr, src } => write!(f, "store {addr} {src}"),
            Body::Jmp(l) => write!(f, "jmp {l}"),
            Body::Jz(l, r) => write!(f, "jz {l} {r}"),
            Body::Nop => f.write_str("nop"),
            Body::Movek(r, k) => write!(f, "movek {r} {k}"),
            Body::Mover(a, b) => write!(f, "mover {a} {b}"),
            Body::Op(op, a, b) => write!(f, "{} {a} {b}", op.mnemonic()),
            Body::Out(ch, r) => write!(f, "out {ch} {r}"),
            Body::Jlez(l, r) => write!(f, "jlez {l} {r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub label: Option<String>,
    pub body: Body,
}

impl Instruction {
    pub fn new(body: Body) -> Self {
        Instruction { label: None, body }
    }

    pub fn labeled(label: impl Into<String>, body: Body) -> Self {
        Instruction { label: Some(label.into()), body }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            Some(l) => write!(f, "{l}: {}", self.body),
            None => write!(f, "    {}", self.body),
        }
    }
}

/// A well-formed program: labels are unique and every jump resolves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    instrs: Vec<Instruction>,
    labels: HashMap<String, usize>,
    targets: Vec<Option<usize>>,
}

impl Program {
    pub fn new(instrs: Vec<Instruction>) -> Result<Self, MachineError> {
        let mut labels = HashMap::new();
        for (i, ins) in instrs.iter().enumerate() {
            if let Some(l) = &ins.label {
                if labels.insert(l.clone(), i).is_some() {
                    return Err(MachineError::DuplicateLabel { label: l.clone(), line: None });
                }
            }
        }
        let targets = instrs
            .iter()
            .map(|ins| match ins.body.target() {
                Some(l) => labels.get(l).copied().map(Some).ok_or_else(|| MachineError::UnknownLabel(l.to_string())),
                None => Ok(None),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Program { instrs, labels, targets })
    }

    pub fn empty() -> Self {
        Program { instrs: Vec::new(), labels: HashMap::new(), targets: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instrs
    }

    pub fn get(&self, pc: usize) -> Option<&Instruction> {
        self.instrs.get(pc)
    }

    /// Position of the instruction carrying label `l`.
    pub fn resolve_label(&self, l: &str) -> Result<usize, MachineError> {
        self.labels.get(l).copied().ok_or_else(|| MachineError::UnknownLabel(l.to_string()))
    }

    /// Resolved jump target of the instruction at `pc`, if it jumps.
    pub fn target_of(&self, pc: usize) -> Option<usize> {
        self.targets.get(pc).copied().flatten()
    }

    pub fn into_instructions(self) -> Vec<Instruction> {
        self.instrs
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ins in &self.instrs {
            writeln!(f, "{ins}")?;
        }
        Ok(())
    }
}
