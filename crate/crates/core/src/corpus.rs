//! The bundled corpus of well-typed while programs and the hash demo.

use std::collections::BTreeMap;

use crate::lang::{parse_with, ParseOptions, SourceProgram};
use crate::machine::{MachineConfig, Program, RiscSystem};
use crate::seccomp::{compile_program, CompileError, CompileOptions, CompiledProgram, Level};

/// Every corpus program terminates from every memory at word widths 1 and 2
/// and fits in two low and two high registers.
pub const CORPUS: &[(&str, &str)] = &[
    ("and_mask", include_str!("../corpus/and_mask.while")),
    ("assign_const", include_str!("../corpus/assign_const.while")),
    ("assign_low", include_str!("../corpus/assign_low.while")),
    ("cached_reload", include_str!("../corpus/cached_reload.while")),
    ("high_product", include_str!("../corpus/high_product.while")),
    ("if_any_high_guard_out", include_str!("../corpus/if_any_high_guard_out.while")),
    ("if_high_compound_guard", include_str!("../corpus/if_high_compound_guard.while")),
    ("if_high_nested", include_str!("../corpus/if_high_nested.while")),
    ("if_high_out_high", include_str!("../corpus/if_high_out_high.while")),
    ("if_high_pad_one", include_str!("../corpus/if_high_pad_one.while")),
    ("if_high_pad_then", include_str!("../corpus/if_high_pad_then.while")),
    ("if_high_pad_uneven", include_str!("../corpus/if_high_pad_uneven.while")),
    ("if_high_unbalanced_time", include_str!("../corpus/if_high_unbalanced_time.while")),
    ("if_low", include_str!("../corpus/if_low.while")),
    ("low_if_inner_high_if", include_str!("../corpus/low_if_inner_high_if.while")),
    ("low_loop_high_if", include_str!("../corpus/low_loop_high_if.while")),
    ("low_loop_then_high_if", include_str!("../corpus/low_loop_then_high_if.while")),
    ("mixed_levels", include_str!("../corpus/mixed_levels.while")),
    ("out_high", include_str!("../corpus/out_high.while")),
    ("out_in_low_loop", include_str!("../corpus/out_in_low_loop.while")),
    ("out_low", include_str!("../corpus/out_low.while")),
    ("out_then_high_loop", include_str!("../corpus/out_then_high_loop.while")),
    ("positive_guard_high", include_str!("../corpus/positive_guard_high.while")),
    ("positive_guard_low", include_str!("../corpus/positive_guard_low.while")),
    ("raise_to_high", include_str!("../corpus/raise_to_high.while")),
    ("seq_chain", include_str!("../corpus/seq_chain.while")),
    ("skip", include_str!("../corpus/skip.while")),
    ("three_lows", include_str!("../corpus/three_lows.while")),
    ("while_high", include_str!("../corpus/while_high.while")),
    ("while_low", include_str!("../corpus/while_low.while")),
    ("while_nested", include_str!("../corpus/while_nested.while")),
];

pub const HASH_SOURCE: &str = include_str!("../programs/hash.while");

/// Parses with the `> 0` guard enabled.
pub fn parse_source(text: &str) -> Result<SourceProgram, crate::lang::LangError> {
    parse_with(text, ParseOptions { jlez: true })
}

pub fn corpus_sources() -> Vec<(&'static str, SourceProgram)> {
    CORPUS.iter().map(|(n, t)| (*n, parse_source(t).expect("corpus programs parse"))).collect()
}

/// Two low and two high registers at word width `width`.
pub fn corpus_options(width: u32) -> CompileOptions {
    CompileOptions { width, registers: MachineConfig::default_registers() }
}

pub fn compile_corpus(width: u32) -> Result<Vec<(&'static str, CompiledProgram)>, (String, CompileError)> {
    let opts = corpus_options(width);
    corpus_sources()
        .into_iter()
        .map(|(n, p)| compile_program(&p, &opts).map(|c| (n, c)).map_err(|e| (n.to_string(), e)))
        .collect()
}

pub fn corpus_systems(width: u32) -> Vec<(String, RiscSystem)> {
    compile_corpus(width)
        .expect("corpus compiles")
        .into_iter()
        .map(|(n, c)| {
            let cfg = c.machine_config();
            (n.to_string(), RiscSystem::new(c.program, cfg).expect("compiled code fits its config"))
        })
        .collect()
}

/// The register bank the hash demo is compiled for: four low and six high.
pub fn hash_registers() -> Vec<Level> {
    let mut r = vec![Level::L; 4];
    r.extend([Level::H; 6]);
    r
}

pub const HASH_GOLDEN: &str = include_str!("../programs/hash_golden.asm");

/// One input of the hash demo. `j` sizes the hash range and is not read by
/// the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashInput {
    pub i: u64,
    pub j: u64,
    pub p: u64,
    pub q: u64,
    pub r: u64,
    pub m: u64,
}

impl HashInput {
    pub const fn new(i: u64, j: u64, p: u64, q: u64, r: u64, m: u64) -> Self {
        HashInput { i, j, p, q, r, m }
    }
}

/// Sample inputs. Each keeps `q*m + r` below 128 and avoids the residues
/// where the loops' `> 0` exits differ from a true modulus.
pub const HASH_SAMPLES: &[HashInput] = &[
    HashInput::new(4, 2, 5, 3, 2, 9),
    HashInput::new(3, 1, 3, 2, 2, 7),
    HashInput::new(5, 2, 5, 4, 3, 17),
    HashInput::new(6, 3, 11, 7, 5, 13),
    HashInput::new(4, 2, 7, 6, 4, 15),
    HashInput::new(2, 1, 3, 1, 2, 3),
    HashInput::new(2, 1, 11, 5, 3, 3),
];

/// `((q*m + r) mod p) mod 2^i`.
pub fn hash_reference(x: &HashInput) -> u64 {
    (x.q * x.m + x.r) % x.p % (1u64 << x.i)
}

pub fn compile_hash(width: u32) -> Result<CompiledProgram, CompileError> {
    let src = parse_source(HASH_SOURCE).expect("hash source parses");
    compile_program(&src, &CompileOptions { width, registers: hash_registers() })
}

pub const HASH_SMALL_SOURCE: &str = include_str!("../programs/hash_small.while");

/// The reduced hash, compiled with the corpus registers.
pub fn compile_hash_small(width: u32) -> Result<CompiledProgram, CompileError> {
    let src = parse_source(HASH_SMALL_SOURCE).expect("reduced hash source parses");
    compile_program(&src, &corpus_options(width))
}

/// Runs the compiled hash fault-free and reads `source`. `None` when the
/// run does not halt within `budget` steps.
pub fn run_hash(c: &CompiledProgram, x: &HashInput, budget: usize) -> Option<u64> {
    let values = [("i", x.i), ("m", x.m), ("p", x.p), ("q", x.q), ("r", x.r)];
    // limit, source and guard start at zero
    let mem = crate::lang::WhileMemory::from_values(c.width, values.map(|(k, v)| (k.to_string(), v)));
    let s = c.initial_state(&mem);
    let (_, end, halted) = crate::machine::run(&c.program, &c.machine_config(), s, budget);
    halted.then(|| end.mem[c.address_of("source").expect("declared") as usize])
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Block {
    mnemonics: BTreeMap<&'static str, usize>,
    // block indices of jump targets, in instruction order
    jumps: Vec<usize>,
}

/// Splits at labelled instructions; blocks are numbered in order of appearance.
fn blocks(p: &Program) -> Vec<Block> {
    let mut starts: Vec<usize> = vec![0];
    starts.extend(p.instructions().iter().enumerate().filter(|(i, ins)| *i > 0 && ins.label.is_some()).map(|(i, _)| i));
    let block_of = |pc: usize| starts.partition_point(|&s| s <= pc) - 1;
    let mut out: Vec<Block> = starts.iter().map(|_| Block { mnemonics: BTreeMap::new(), jumps: Vec::new() }).collect();
    for (pc, ins) in p.instructions().iter().enumerate() {
        let b = &mut out[block_of(pc)];
        *b.mnemonics.entry(ins.body.mnemonic()).or_default() += 1;
        if let Some(t) = p.target_of(pc).filter(|_| ins.body.target().is_some()) {
            b.jumps.push(block_of(t));
        }
    }
    out
}

/// Compares two programs block by block: the same jump graph between
/// labelled blocks and the same multiset of mnemonics in each block.
/// Register names, addresses and the order inside a block are ignored.
pub fn structural_diff(a: &Program, b: &Program) -> Vec<String> {
    let (ba, bb) = (blocks(a), blocks(b));
    let mut diffs = Vec::new();
    if ba.len() != bb.len() {
        diffs.push(format!("{} blocks vs {}", ba.len(), bb.len()));
    }
    for (k, (x, y)) in ba.iter().zip(&bb).enumerate() {
        if x.mnemonics != y.mnemonics {
            diffs.push(format!("block {k}: mnemonics {:?} vs {:?}", x.mnemonics, y.mnemonics));
        }
        if x.jumps != y.jumps {
            diffs.push(format!("block {k}: jumps to {:?} vs {:?}", x.jumps, y.jumps));
        }
    }
    diffs
}
