use crate::faultlab::{Action, BitState, FaultProneSystem, Layout, Location};

use super::{step_in_place, MachineConfig, MachineError, MachineState, Program};

/// A RISC program packaged as a fault-prone system. The pc bits are fault
/// tolerant; register and memory bits are faulty. The code itself is fixed
/// by the system value and never flipped.
#[derive(Debug, Clone)]
pub struct RiscSystem {
    program: Program,
    cfg: MachineConfig,
    layout: Layout,
    pc_bits: usize,
}

/// Name of bit `b` of register `r`.
pub fn reg_bit_name(r: usize, b: u32) -> String {
    format!("r{r}_{b}")
}

/// Name of bit `b` of memory cell `a`.
pub fn mem_bit_name(a: usize, b: u32) -> String {
    format!("m{a}_{b}")
}

impl RiscSystem {
    pub fn new(program: Program, cfg: MachineConfig) -> Result<Self, MachineError> {
        cfg.validate(&program)?;
        // enough bits for every pc in 0..=|P|
        let pc_bits = (usize::BITS - program.len().leading_zeros()).max(1) as usize;
        let mut locs = Vec::new();
        for b in 0..pc_bits {
            locs.push(Location::tolerant(format!("pc_{b}")));
        }
        for r in 0..cfg.registers.len() {
            for b in 0..cfg.width {
                locs.push(Location::faulty(reg_bit_name(r, b)));
            }
        }
        for a in 0..cfg.memory.len() {
            for b in 0..cfg.width {
                locs.push(Location::faulty(mem_bit_name(a, b)));
            }
        }
        let layout = Layout::new(locs).expect("generated names are unique");
        Ok(RiscSystem { program, cfg, layout, pc_bits })
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn config(&self) -> &MachineConfig {
        &self.cfg
    }

    fn reg_offset(&self, r: usize) -> usize {
        self.pc_bits + r * self.cfg.width as usize
    }

    fn mem_offset(&self, a: usize) -> usize {
        self.pc_bits + (self.cfg.registers.len() + a) * self.cfg.width as usize
    }

    pub fn reg_bit(&self, r: usize, b: u32) -> usize {
        self.reg_offset(r) + b as usize
    }

    pub fn mem_bit(&self, a: usize, b: u32) -> usize {
        self.mem_offset(a) + b as usize
    }

    pub fn encode(&self, s: &MachineState) -> BitState {
        let w = self.cfg.width as usize;
        let mut bits = BitState::zeros(self.layout.len());
        bits.write_word(0, self.pc_bits, s.pc as u64);
        for (r, v) in s.regs.iter().enumerate() {
            bits.write_word(self.reg_offset(r), w, *v);
        }
        for (a, v) in s.mem.iter().enumerate() {
            bits.write_word(self.mem_offset(a), w, *v);
        }
        bits
    }

    pub fn decode(&self, bits: &BitState) -> MachineState {
        let w = self.cfg.width as usize;
        MachineState {
            pc: bits.read_word(0, self.pc_bits) as usize,
            regs: (0..self.cfg.registers.len()).map(|r| bits.read_word(self.reg_offset(r), w)).collect(),
            mem: (0..self.cfg.memory.len()).map(|a| bits.read_word(self.mem_offset(a), w)).collect(),
        }
    }
}

impl FaultProneSystem for RiscSystem {
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn step(&self, s: &BitState) -> Option<(Action, BitState)> {
        let mut m = self.decode(s);
        let a = step_in_place(&self.program, &self.cfg, &mut m)?;
        Some((a, self.encode(&m)))
    }
}
