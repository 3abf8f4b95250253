use crate::faultlab::{Action, Channel};
use crate::seccomp::Level;

use super::{Body, MachineError, Program, Reg};

/// Word width, register bank and memory layout of a machine, each register
/// and cell tagged with its security level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineConfig {
    pub width: u32,
    pub registers: Vec<Level>,
    pub memory: Vec<Level>,
    pub jlez: bool,
}

pub const MAX_WIDTH: u32 = 32;

impl MachineConfig {
    pub fn new(width: u32, registers: Vec<Level>, memory: Vec<Level>) -> Self {
        MachineConfig { width, registers, memory, jlez: false }
    }

    /// Two low registers followed by two high registers.
    pub fn default_registers() -> Vec<Level> {
        vec![Level::L, Level::L, Level::H, Level::H]
    }

    pub fn with_jlez(mut self, on: bool) -> Self {
        self.jlez = on;
        self
    }

    pub fn with_width(mut self, width: u32) -> Self {
        self.width = width;
        self
    }

    pub fn mask(&self) -> u64 {
        if self.width >= 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    pub fn register_level(&self, r: Reg) -> Level {
        self.registers[r.0]
    }

    /// Number of data bits (registers and memory).
    pub fn data_bits(&self) -> usize {
        (self.registers.len() + self.memory.len()) * self.width as usize
    }

    /// Checks that `p` only names existing registers and cells, that its
    /// constants fit in a word, and that `jlez` is enabled if used.
    pub fn validate(&self, p: &Program) -> Result<(), MachineError> {
        if self.width == 0 || self.width > MAX_WIDTH {
            return Err(MachineError::Config(format!("word width {} outside 1..={MAX_WIDTH}", self.width)));
        }
        for (pc, ins) in p.instructions().iter().enumerate() {
            for r in ins.body.registers() {
                if r.0 >= self.registers.len() {
                    return Err(MachineError::Config(format!("pc {pc}: register {r} not configured")));
                }
            }
            if let Some(a) = ins.body.address() {
                if a >= self.memory.len() as u64 {
                    return Err(MachineError::Config(format!("pc {pc}: address {a} outside memory")));
                }
            }
            match ins.body {
                Body::Movek(_, k) if k > self.mask() => {
                    return Err(MachineError::Config(format!("pc {pc}: constant {k} exceeds {}-bit word", self.width)));
                }
                Body::Jlez(..) if !self.jlez => {
                    return Err(MachineError::Config(format!("pc {pc}: jlez used but the extension is off")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> MachineState {
        MachineState { pc: 0, regs: vec![0; self.registers.len()], mem: vec![0; self.memory.len()] }
    }

    /// Whether two data states agree on every low register and cell.
    pub fn low_equal(&self, a: &MachineState, b: &MachineState) -> bool {
        self.registers.iter().enumerate().all(|(i, l)| *l == Level::H || a.regs[i] == b.regs[i])
            && self.memory.iter().enumerate().all(|(i, l)| *l == Level::H || a.mem[i] == b.mem[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MachineState {
    pub pc: usize,
    pub regs: Vec<u64>,
    pub mem: Vec<u64>,
}

impl MachineState {
    pub fn is_stuck(&self, p: &Program) -> bool {
        self.pc >= p.len()
    }
}

/// Whether `v` read as a `width`-bit two's-complement number is at most zero.
pub fn signed_le_zero(v: u64, width: u32) -> bool {
    v == 0 || v >> (width - 1) & 1 == 1
}

/// Executes one instruction in place. Returns `None` (leaving `s` unchanged)
/// when the state is stuck.
pub fn step_in_place(p: &Program, cfg: &MachineConfig, s: &mut MachineState) -> Option<Action> {
    let ins = p.get(s.pc)?;
    let mask = cfg.mask();
    let mut action = Action::Tau;
    let mut next = s.pc + 1;
    match ins.body {
        Body::Load { dst, addr } => s.regs[dst.0] = s.mem[addr as usize],
        Body::Store { addr, src } => s.mem[addr as usize] = s.regs[src.0],
        Body::Jmp(_) => next = p.target_of(s.pc).expect("resolved jump"),
        Body::Jz(_, r) => {
            if s.regs[r.0] == 0 {
                next = p.target_of(s.pc).expect("resolved jump");
            }
        }
        Body::Jlez(_, r) => {
            if signed_le_zero(s.regs[r.0], cfg.width) {
                next = p.target_of(s.pc).expect("resolved jump");
            }
        }
        Body::Nop => {}
        Body::Movek(r, k) => s.regs[r.0] = k & mask,
        Body::Mover(a, b) => s.regs[a.0] = s.regs[b.0],
        Body::Op(op, a, b) => s.regs[a.0] = op.apply(s.regs[a.0], s.regs[b.0], mask),
        Body::Out(ch, r) => action = Action::Out(ch, s.regs[r.0]),
    }
    s.pc = next;
    Some(action)
}

/// One machine step; `None` when `s` is stuck.
pub fn step(p: &Program, cfg: &MachineConfig, s: &MachineState) -> Option<(Action, MachineState)> {
    let mut t = s.clone();
    let a = step_in_place(p, cfg, &mut t)?;
    Some((a, t))
}

/// Runs fault-free for at most `budget` steps, returning the emitted actions
/// and the final state. The boolean is true when the run halted.
pub fn run(p: &Program, cfg: &MachineConfig, mut s: MachineState, budget: usize) -> (Vec<Action>, MachineState, bool) {
    let mut trace = Vec::new();
    for _ in 0..budget {
        match step_in_place(p, cfg, &mut s) {
            Some(a) => trace.push(a),
            None => return (trace, s, true),
        }
    }
    let halted = s.is_stuck(p);
    (trace, s, halted)
}

/// The channel's level: low is L, high is H.
pub fn channel_level(ch: Channel) -> Level {
    match ch {
        Channel::Low => Level::L,
        Channel::High => Level::H,
    }
}
