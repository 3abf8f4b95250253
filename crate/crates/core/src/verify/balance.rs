use std::collections::{BTreeSet, HashMap};

use crate::faultlab::Action;
use crate::machine::{step_in_place, Body, MachineConfig, MachineState, Program};
use crate::seccomp::{IfHSite, Level};

/// Per-site path lengths plus the outcome of the fault-free high sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalanceReport {
    /// For each site, the executed-instruction counts of every path through
    /// the then and else regions.
    pub regions: Vec<(BTreeSet<u64>, BTreeSet<u64>)>,
    /// Raw instruction counts of the then and else regions.
    pub raw_counts: Vec<(usize, usize)>,
    /// Low assignments for which some high assignment changed the low
    /// (action, step) observations or the time spent in a site.
    pub sweep_failures: Vec<Vec<u64>>,
    pub sweep_runs: u64,
}

impl BalanceReport {
    pub fn regions_balanced(&self) -> bool {
        self.regions.iter().all(|(t, e)| t.len() == 1 && t == e)
    }

    pub fn balanced(&self) -> bool {
        self.regions_balanced() && self.sweep_failures.is_empty()
    }
}

/// Executed-instruction counts of every path from `from` until control leaves
/// `from..to`.
fn paths(p: &Program, from: usize, to: usize) -> BTreeSet<u64> {
    let mut out = BTreeSet::new();
    let mut stack = vec![(from, 0u64)];
    while let Some((pc, n)) = stack.pop() {
        if pc < from || pc >= to || n > p.len() as u64 * 4 {
            out.insert(n);
            continue;
        }
        let ins = &p.instructions()[pc];
        match ins.body {
            Body::Jmp(_) => stack.push((p.target_of(pc).expect("resolved"), n + 1)),
            Body::Jz(..) | Body::Jlez(..) => {
                stack.push((pc + 1, n + 1));
                stack.push((p.target_of(pc).expect("resolved"), n + 1));
            }
            _ => stack.push((pc + 1, n + 1)),
        }
    }
    out
}

/// Path lengths through the then and else regions of `site`.
pub fn region_path_lengths(p: &Program, site: &IfHSite) -> (BTreeSet<u64>, BTreeSet<u64>) {
    (paths(p, site.then_start, site.else_start), paths(p, site.else_start, site.end))
}

/// Low (action, step) pairs and (site, duration) pairs of one fault-free run.
type Observation = (Vec<(Action, u64)>, Vec<(usize, u64)>);

fn observe(p: &Program, cfg: &MachineConfig, sites: &[IfHSite], mut s: MachineState, budget: usize) -> Observation {
    let mut low = Vec::new();
    let mut durations = Vec::new();
    let mut open: HashMap<usize, u64> = HashMap::new();
    for step in 0..budget as u64 {
        for (k, site) in sites.iter().enumerate() {
            if s.pc == site.start {
                open.insert(k, step);
            } else if s.pc == site.end {
                if let Some(t0) = open.remove(&k) {
                    durations.push((k, step - t0));
                }
            }
        }
        match step_in_place(p, cfg, &mut s) {
            Some(a) if a.is_low() => low.push((a, step)),
            Some(_) => {}
            None => break,
        }
    }
    (low, durations)
}

/// Checks that every if-H site is balanced, and that fault-free runs from
/// zeroed registers and every memory content look the same to a low observer
/// once the low cells are fixed.
pub fn check_timing_balance(p: &Program, cfg: &MachineConfig, sites: &[IfHSite], budget: usize) -> BalanceReport {
    let regions: Vec<_> = sites.iter().map(|s| region_path_lengths(p, s)).collect();
    let raw_counts = sites.iter().map(|s| (s.else_start - s.then_start, s.end - s.else_start)).collect();
    let lows: Vec<usize> = (0..cfg.memory.len()).filter(|&a| cfg.memory[a] == Level::L).collect();
    let highs: Vec<usize> = (0..cfg.memory.len()).filter(|&a| cfg.memory[a] == Level::H).collect();
    let base = 1u64 << cfg.width;
    let nl = base.pow(lows.len() as u32);
    let nh = base.pow(highs.len() as u32);
    let assign = |s: &mut MachineState, cells: &[usize], mut idx: u64| {
        for &a in cells {
            s.mem[a] = idx % base;
            idx /= base;
        }
    };
    let mut sweep_failures = Vec::new();
    let mut sweep_runs = 0;
    for l in 0..nl {
        let mut first: Option<Vec<(Action, u64)>> = None;
        // a site nested in a branch is not always entered, but whenever it
        // is, it must take the same time
        let mut durations: HashMap<usize, u64> = HashMap::new();
        for h in 0..nh {
            let mut s = cfg.initial_state();
            assign(&mut s, &lows, l);
            assign(&mut s, &highs, h);
            let (low, durs) = observe(p, cfg, sites, s.clone(), budget);
            sweep_runs += 1;
            let same_time = durs.iter().all(|(k, d)| *d == sites[*k].steps && *durations.entry(*k).or_insert(*d) == *d);
            let same_low = first.get_or_insert_with(|| low.clone()) == &low;
            if !same_time || !same_low {
                sweep_failures.push(lows.iter().map(|&a| s.mem[a]).collect());
                break;
            }
        }
    }
    BalanceReport { regions, raw_counts, sweep_failures, sweep_runs }
}
