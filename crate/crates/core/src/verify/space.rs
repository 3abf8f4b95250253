use std::collections::BTreeMap;

use crate::faultlab::{BitState, FaultProneSystem};
use crate::machine::{MachineConfig, MachineState, RiscSystem};
use crate::seccomp::Level;

use super::{budget_check, CheckConfig, VerifyError};

#[derive(Debug, Clone, Copy)]
enum Slot {
    Reg(usize),
    Mem(usize),
}

/// Enumeration of initial data states, split into low and high words.
#[derive(Debug, Clone)]
pub struct InitialSpace {
    low: Vec<Slot>,
    high: Vec<Slot>,
    base: u64,
    nregs: usize,
    nmem: usize,
}

fn slot_name(s: Slot) -> String {
    match s {
        Slot::Reg(r) => format!("r{r}"),
        Slot::Mem(a) => format!("m{a}"),
    }
}

impl InitialSpace {
    pub fn new(cfg: &MachineConfig, value_bound: Option<u64>) -> Self {
        let full = 1u64 << cfg.width;
        let base = value_bound.map_or(full, |b| b.clamp(1, full));
        let mut low = Vec::new();
        let mut high = Vec::new();
        let slots = (0..cfg.registers.len())
            .map(|r| (Slot::Reg(r), cfg.registers[r]))
            .chain((0..cfg.memory.len()).map(|a| (Slot::Mem(a), cfg.memory[a])));
        for (s, l) in slots {
            match l {
                Level::L => low.push(s),
                Level::H => high.push(s),
            }
        }
        InitialSpace { low, high, base, nregs: cfg.registers.len(), nmem: cfg.memory.len() }
    }

    fn count(&self, n: usize) -> Option<u64> {
        self.base.checked_pow(n as u32)
    }

    pub fn low_count(&self) -> Option<u64> {
        self.count(self.low.len())
    }

    pub fn high_count(&self) -> Option<u64> {
        self.count(self.high.len())
    }

    pub fn total(&self) -> Option<u64> {
        self.low_count()?.checked_mul(self.high_count()?)
    }

    fn fill(&self, slots: &[Slot], mut idx: u64, s: &mut MachineState) {
        for &slot in slots {
            let v = idx % self.base;
            idx /= self.base;
            match slot {
                Slot::Reg(r) => s.regs[r] = v,
                Slot::Mem(a) => s.mem[a] = v,
            }
        }
    }

    /// The initial state at pc 0 with the given low and high assignments.
    pub fn state(&self, low_idx: u64, high_idx: u64) -> MachineState {
        let mut s = MachineState { pc: 0, regs: vec![0; self.nregs], mem: vec![0; self.nmem] };
        self.fill(&self.low, low_idx, &mut s);
        self.fill(&self.high, high_idx, &mut s);
        s
    }

    fn values(&self, slots: &[Slot], s: &MachineState) -> BTreeMap<String, u64> {
        slots
            .iter()
            .map(|&slot| {
                let v = match slot {
                    Slot::Reg(r) => s.regs[r],
                    Slot::Mem(a) => s.mem[a],
                };
                (slot_name(slot), v)
            })
            .collect()
    }

    /// The low words of `s` in slot order.
    pub fn low_key(&self, s: &MachineState) -> Vec<u64> {
        self.low
            .iter()
            .map(|slot| match *slot {
                Slot::Reg(r) => s.regs[r],
                Slot::Mem(a) => s.mem[a],
            })
            .collect()
    }

    pub fn low_values(&self, s: &MachineState) -> BTreeMap<String, u64> {
        self.values(&self.low, s)
    }

    pub fn high_values(&self, s: &MachineState) -> BTreeMap<String, u64> {
        self.values(&self.high, s)
    }

    /// Initial bit states grouped by low part, each group in high-index order.
    pub fn groups(&self, sys: &RiscSystem, cfg: &CheckConfig) -> Result<Vec<Vec<BitState>>, VerifyError> {
        let total = self.total().unwrap_or(u64::MAX);
        budget_check("initial states", total, cfg.budget)?;
        let (nl, nh) = (self.low_count().unwrap_or(0), self.high_count().unwrap_or(0));
        Ok((0..nl).map(|l| (0..nh).map(|h| sys.encode(&self.state(l, h))).collect()).collect())
    }
}

/// A small default fault scope: bit 0 of the first low register, the first
/// high register, the first low cell and the first high cell.
pub fn probe_scope(sys: &RiscSystem) -> Vec<usize> {
    let cfg = sys.config();
    let mut out = Vec::new();
    for lvl in [Level::L, Level::H] {
        if let Some(r) = cfg.registers.iter().position(|l| *l == lvl) {
            out.push(sys.reg_bit(r, 0));
        }
    }
    for lvl in [Level::L, Level::H] {
        if let Some(a) = cfg.memory.iter().position(|l| *l == lvl) {
            out.push(sys.mem_bit(a, 0));
        }
    }
    out.sort_unstable();
    out
}

/// Resolves the configured scope against the system's layout.
pub(super) fn resolve_scope(sys: &RiscSystem, cfg: &CheckConfig) -> Result<Vec<usize>, VerifyError> {
    match &cfg.scope {
        None => Ok(sys.layout().faulty()),
        Some(names) => {
            Ok(sys.layout().fault_set(names).map_err(|e| VerifyError::Config(e.to_string()))?.locations().to_vec())
        }
    }
}
