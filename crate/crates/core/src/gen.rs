//! Seeded generators for random fault-prone systems, environments and raw
//! assembly programs.

use std::collections::{BTreeMap, HashMap};

use num::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::faultlab::{powerset, Action, BitState, Channel, Environment, Layout, Location, TableSystem};
use crate::machine::{BinOp, Body, Instruction, MachineConfig, Program, Reg, RiscSystem};
use crate::seccomp::Level;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_action(rng: &mut ChaCha8Rng) -> Action {
    match rng.gen_range(0..5) {
        0 | 1 => Action::Tau,
        2 => Action::Out(Channel::Low, 0),
        3 => Action::Out(Channel::Low, 1),
        _ => Action::Out(Channel::High, rng.gen_range(0..2)),
    }
}

/// A random explicit system with up to two tolerant and `faulty` faulty
/// bits. About one state in six is stuck.
pub fn random_table_system(rng: &mut ChaCha8Rng, faulty: usize) -> TableSystem {
    let tolerant = rng.gen_range(0..=2);
    let mut locs: Vec<Location> = (0..tolerant).map(|i| Location::tolerant(format!("t{i}"))).collect();
    locs.extend((0..faulty).map(|i| Location::faulty(format!("f{i}"))));
    let n = locs.len();
    let layout = Layout::new(locs).expect("distinct names");
    let mut table = HashMap::new();
    for code in 0u64..1 << n {
        if rng.gen_ratio(1, 6) {
            continue;
        }
        let bits: Vec<bool> = (0..n).map(|b| code >> b & 1 == 1).collect();
        let to: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        table.insert(BitState::from_bits(&bits), (random_action(rng), BitState::from_bits(&to)));
    }
    TableSystem::new(layout, table)
}

/// A random environment over `scope` with one to three states. Each state
/// puts positive integer weights on a random nonempty family of fault sets.
pub fn random_environment(rng: &mut ChaCha8Rng, scope: &[usize]) -> Environment {
    let states = rng.gen_range(1..=3);
    let subsets = powerset(scope);
    let mut moves = Vec::new();
    let mut fallback = Vec::new();
    let mut faults = Vec::new();
    for _ in 0..states {
        let mut m = HashMap::new();
        for a in [Action::Tau, Action::Out(Channel::Low, 0), Action::Out(Channel::Low, 1)] {
            if rng.gen() {
                m.insert(a, rng.gen_range(0..states));
            }
        }
        moves.push(m);
        fallback.push(rng.gen_range(0..states));
        let k = rng.gen_range(1..=subsets.len());
        let chosen: Vec<_> = subsets.choose_multiple(rng, k).cloned().collect();
        let weights: Vec<i64> = chosen.iter().map(|_| rng.gen_range(1..=4)).collect();
        let total: i64 = weights.iter().sum();
        let table: BTreeMap<_, _> =
            chosen.into_iter().zip(weights).map(|(l, w)| (l, BigRational::new(w.into(), total.into()))).collect();
        faults.push(table);
    }
    let names = (0..states).map(|i| format!("e{i}")).collect();
    Environment::new(scope.to_vec(), names, moves, fallback, faults).expect("generated environment is valid")
}

/// Configuration of the random raw programs: one-bit words, two low and two
/// high registers, one low and one high cell.
pub fn raw_config() -> MachineConfig {
    MachineConfig::new(1, MachineConfig::default_registers(), vec![Level::L, Level::H])
}

fn level_regs(level: Level) -> [usize; 2] {
    match level {
        Level::L => [0, 1],
        Level::H => [2, 3],
    }
}

fn random_body(rng: &mut ChaCha8Rng, disciplined: bool, pc: usize, len: usize) -> (Body, Option<usize>) {
    let any = |rng: &mut ChaCha8Rng| Reg(rng.gen_range(0..4));
    let lvl = |rng: &mut ChaCha8Rng| if rng.gen() { Level::L } else { Level::H };
    let pick = |rng: &mut ChaCha8Rng, l: Level| Reg(*level_regs(l).choose(rng).expect("two registers"));
    let target = |rng: &mut ChaCha8Rng| {
        if disciplined {
            rng.gen_range(pc + 1..len)
        } else {
            rng.gen_range(0..len)
        }
    };
    let ops = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::And];
    let choice = rng.gen_range(0..9);
    if !disciplined {
        let body = match choice {
            0 => Body::Load { dst: any(rng), addr: rng.gen_range(0..2) },
            1 => Body::Store { addr: rng.gen_range(0..2), src: any(rng) },
            2 => Body::Movek(any(rng), rng.gen_range(0..2)),
            3 => Body::Mover(any(rng), any(rng)),
            4 => Body::Op(*ops.choose(rng).expect("nonempty"), any(rng), any(rng)),
            5 => Body::Out(if rng.gen() { Channel::Low } else { Channel::High }, any(rng)),
            6 => return (Body::Jz(String::new(), any(rng)), Some(target(rng))),
            7 => return (Body::Jmp(String::new()), Some(target(rng))),
            _ => Body::Nop,
        };
        return (body, None);
    }
    // data flows only upwards and branching only on low registers
    let body = match choice {
        0 => {
            let a = rng.gen_range(0..2u64);
            let src = if a == 0 { lvl(rng) } else { Level::H };
            Body::Load { dst: pick(rng, src), addr: a }
        }
        1 => {
            let a = rng.gen_range(0..2u64);
            let src = if a == 0 { Level::L } else { lvl(rng) };
            Body::Store { addr: a, src: pick(rng, src) }
        }
        2 => Body::Movek(any(rng), rng.gen_range(0..2)),
        3 => {
            let l = lvl(rng);
            let dst = pick(rng, l);
            let src = if l == Level::L { pick(rng, Level::L) } else { any(rng) };
            Body::Mover(dst, src)
        }
        4 => {
            let l = lvl(rng);
            let dst = pick(rng, l);
            let src = if l == Level::L { pick(rng, Level::L) } else { any(rng) };
            Body::Op(*ops.choose(rng).expect("nonempty"), dst, src)
        }
        5 => {
            if rng.gen() {
                Body::Out(Channel::Low, pick(rng, Level::L))
            } else {
                Body::Out(Channel::High, any(rng))
            }
        }
        6 if pc + 1 < len => return (Body::Jz(String::new(), pick(rng, Level::L)), Some(target(rng))),
        7 if pc + 1 < len => return (Body::Jmp(String::new()), Some(target(rng))),
        _ => Body::Nop,
    };
    (body, None)
}

/// A random program of `len` instructions over [`raw_config`]. Disciplined
/// programs only jump forward, branch on low registers and never move high
/// data into low locations.
pub fn random_program(rng: &mut ChaCha8Rng, len: usize, disciplined: bool) -> Program {
    let mut bodies = Vec::with_capacity(len);
    for pc in 0..len {
        bodies.push(random_body(rng, disciplined, pc, len));
    }
    let mut instrs: Vec<Instruction> = bodies
        .iter()
        .map(|(b, t)| {
            let b = match (b, t) {
                (Body::Jz(_, r), Some(t)) => Body::Jz(format!("l{t}"), *r),
                (Body::Jmp(_), Some(t)) => Body::Jmp(format!("l{t}")),
                _ => b.clone(),
            };
            Instruction::new(b)
        })
        .collect();
    let targets: std::collections::BTreeSet<usize> = bodies.iter().filter_map(|(_, t)| *t).collect();
    for t in targets {
        instrs[t].label = Some(format!("l{t}"));
    }
    Program::new(instrs).expect("generated labels resolve")
}

/// A random program packaged with [`raw_config`].
pub fn random_risc_system(rng: &mut ChaCha8Rng, disciplined: bool) -> RiscSystem {
    let len = rng.gen_range(2..=7);
    RiscSystem::new(random_program(rng, len, disciplined), raw_config()).expect("generated program fits the config")
}
