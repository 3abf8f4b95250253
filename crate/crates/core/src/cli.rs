//! Command-line front end.
//!
//! Exit codes: 0 success or secure, 1 input/output, parse or configuration
//! error, 2 type error or usage error, 3 violation, 4 resource budget
//! exceeded, 5 hash demo mismatch.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{compile_hash, hash_reference, run_hash, HASH_SAMPLES};
use crate::faultlab::{augmented_step_with, Environment, FaultProneSystem, FaultSet};
use crate::lang::{parse_with, ParseOptions};
use crate::machine::{assemble, MachineConfig, MachineState, RiscSystem};
use crate::seccomp::{compile_program, CompileError, CompileOptions, Level};
use crate::verify::{self, CheckConfig, VerifyError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_TYPE: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "ftni", version, about = "Security-typed compiler and fault-injection noninterference checker")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a while program to assembly plus a JSON side-car.
    Compile(CompileArgs),
    /// Run an assembly program, optionally under a fault script.
    Run(RunArgs),
    /// Run an assembly program under a required fault script.
    Inject(RunArgs),
    /// Check a security property of an assembly program.
    Check(CheckArgs),
    /// Compile and run the keyed hash example on sample inputs.
    DemoHash(DemoArgs),
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    pub source: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub width: u32,
    /// Accept `while x > 0` guards.
    #[arg(long)]
    pub jlez: bool,
    /// Register levels, one letter per register.
    #[arg(long, default_value = "LLHH")]
    pub regs: String,
    /// Assembly output; defaults to the source path with extension `asm`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Side-car output; defaults to the source path with extension `json`.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

/// How to build a machine configuration for raw assembly.
#[derive(Debug, Args, Clone)]
pub struct MachineArgs {
    /// Word width; overrides the side-car.
    #[arg(long)]
    pub width: Option<u32>,
    /// Register levels such as `LLHH`; overrides the side-car.
    #[arg(long)]
    pub regs: Option<String>,
    /// Memory cell levels such as `LH`. Without this or a side-car every
    /// addressed cell is low.
    #[arg(long = "mem-levels")]
    pub mem_levels: Option<String>,
    /// Side-car written by `compile`.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub jlez: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub asm: PathBuf,
    #[command(flatten)]
    pub machine: MachineArgs,
    /// Initial memory, `name=value` with a variable from the side-car or
    /// a cell `m<addr>` or register `r<n>`.
    #[arg(long = "mem", value_name = "K=V")]
    pub mem: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Fault script: lines `<step> <loc>[,<loc>...]`, steps counted from 1.
    #[arg(long)]
    pub faults: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Ss,
    Poni,
    Pni,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub asm: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[command(flatten)]
    pub machine: MachineArgs,
    /// Environment table for `pni`.
    #[arg(long)]
    pub env: Option<PathBuf>,
    /// Comma-separated faulty locations, or `all`. Defaults to bit 0 of the
    /// first low and high register and memory cell.
    #[arg(long)]
    pub scope: Option<String>,
    /// Initial words range over `0..bound`.
    #[arg(long = "value-bound")]
    pub value_bound: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(8..=32))]
    pub width: u32,
}

/// A failure with its exit code, what still goes to stdout, and a diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub stdout: String,
    pub message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure { code, stdout: String::new(), message: message.into() }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(EXIT_ERROR, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| fail(EXIT_ERROR, format!("{}: {e}", path.display())))
}

fn parse_levels(s: &str) -> Result<Vec<Level>, Failure> {
    s.chars()
        .filter(|c| !c.is_whitespace() && *c != ',')
        .map(|c| Level::parse(&c.to_string()).ok_or_else(|| fail(EXIT_ERROR, format!("bad level `{c}` in `{s}`"))))
        .collect()
}

/// Runs a parsed command line, returning what to print on success.
pub fn run_cli(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Compile(a) => cmd_compile(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Inject(a) => {
            if a.faults.is_none() {
                return Err(fail(EXIT_TYPE, "inject requires --faults"));
            }
            cmd_run(&a)
        }
        Command::Check(a) => cmd_check(&a),
        Command::DemoHash(a) => cmd_demo_hash(&a),
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let cli = Cli::parse();
    if let Command::Check(a) = &cli.command {
        if a.mode == Mode::Pni && a.env.is_none() {
            use clap::CommandFactory;
            Cli::command()
                .error(clap::error::ErrorKind::MissingRequiredArgument, "--mode pni requires --env <ENV>")
                .exit();
        }
    }
    match run_cli(cli) {
        Ok(out) => {
            print!("{out}");
            EXIT_OK
        }
        Err(f) => {
            print!("{}", f.stdout);
            if !f.message.is_empty() {
                eprintln!("ftni: {}", f.message);
            }
            f.code
        }
    }
}

fn cmd_compile(a: &CompileArgs) -> Result<String, Failure> {
    let text = read(&a.source)?;
    let src = parse_with(&text, ParseOptions { jlez: a.jlez })
        .map_err(|e| fail(EXIT_ERROR, format!("{}:{e}", a.source.display())))?;
    let opts = CompileOptions { width: a.width, registers: parse_levels(&a.regs)? };
    let c = compile_program(&src, &opts).map_err(|e| match e {
        CompileError::Type(t) => fail(EXIT_TYPE, format!("{}: {t}", a.source.display())),
        other => fail(EXIT_ERROR, other.to_string()),
    })?;
    let out = a.out.clone().unwrap_or_else(|| a.source.with_extension("asm"));
    let meta = a.meta.clone().unwrap_or_else(|| a.source.with_extension("json"));
    write(&out, &c.program.to_string())?;
    let json = serde_json::to_string_pretty(&c.metadata()).expect("metadata serializes");
    write(&meta, &format!("{json}\n"))?;
    Ok(format!("{} instructions, <{}, {}>\n", c.program.len(), c.program_timing(), c.annotation.write))
}

struct Loaded {
    sys: RiscSystem,
    vars: BTreeMap<String, u64>,
}

fn load_machine(asm: &Path, m: &MachineArgs) -> Result<Loaded, Failure> {
    let text = read(asm)?;
    let program = assemble(&text).map_err(|e| fail(EXIT_ERROR, format!("{}:{e}", asm.display())))?;
    let mut vars = BTreeMap::new();
    let mut cfg = MachineConfig::new(8, MachineConfig::default_registers(), Vec::new()).with_jlez(m.jlez);
    let mut mem_known = false;
    if let Some(meta) = &m.meta {
        let v: serde_json::Value =
            serde_json::from_str(&read(meta)?).map_err(|e| fail(EXIT_ERROR, format!("{}: {e}", meta.display())))?;
        let levels = |key: &str| -> Result<Option<Vec<Level>>, Failure> {
            match v.get(key).and_then(|x| x.as_array()) {
                None => Ok(None),
                Some(xs) => xs
                    .iter()
                    .map(|x| x.as_str().and_then(Level::parse).ok_or_else(|| fail(EXIT_ERROR, format!("bad {key}"))))
                    .collect::<Result<Vec<_>, _>>()
                    .map(Some),
            }
        };
        if let Some(r) = levels("register_levels")? {
            cfg.registers = r;
        }
        if let Some(mm) = levels("memory_levels")? {
            cfg.memory = mm;
            mem_known = true;
        }
        if let Some(w) = v.get("width").and_then(|x| x.as_u64()) {
            cfg.width = w as u32;
        }
        if v.get("jlez").and_then(|x| x.as_bool()) == Some(true) {
            cfg.jlez = true;
        }
        if let Some(map) = v.get("v2p").and_then(|x| x.as_object()) {
            for (k, a) in map {
                vars.insert(k.clone(), a.as_u64().ok_or_else(|| fail(EXIT_ERROR, "bad v2p entry"))?);
            }
        }
    }
    if let Some(w) = m.width {
        cfg.width = w;
    }
    if let Some(r) = &m.regs {
        cfg.registers = parse_levels(r)?;
    }
    if let Some(ml) = &m.mem_levels {
        cfg.memory = parse_levels(ml)?;
        mem_known = true;
    }
    if !mem_known {
        let cells = program.instructions().iter().filter_map(|i| i.body.address()).max().map_or(0, |a| a as usize + 1);
        cfg.memory = vec![Level::L; cells];
    }
    let sys = RiscSystem::new(program, cfg).map_err(|e| fail(EXIT_ERROR, e.to_string()))?;
    Ok(Loaded { sys, vars })
}

fn parse_fault_script(text: &str, sys: &RiscSystem) -> Result<BTreeMap<usize, FaultSet>, Failure> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| fail(EXIT_ERROR, format!("fault script line {}: {m}", n + 1));
        let (step, locs) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let step: usize = step.parse().map_err(|_| err(format!("bad step `{step}`")))?;
        if step == 0 {
            return Err(err("steps are counted from 1".into()));
        }
        let names: Vec<&str> = locs.split([',', ' ']).filter(|s| !s.is_empty()).collect();
        let set = sys.layout().fault_set(&names).map_err(|e| err(e.to_string()))?;
        if out.insert(step, set).is_some() {
            return Err(err(format!("step {step} listed twice")));
        }
    }
    Ok(out)
}

fn initial_state(l: &Loaded, assigns: &[String]) -> Result<MachineState, Failure> {
    let cfg = l.sys.config();
    let mut s = cfg.initial_state();
    for kv in assigns {
        let (k, v) = kv.split_once('=').ok_or_else(|| fail(EXIT_ERROR, format!("expected K=V, got `{kv}`")))?;
        let v: u64 = v.trim().parse().map_err(|_| fail(EXIT_ERROR, format!("bad value in `{kv}`")))?;
        if v > cfg.mask() {
            return Err(fail(EXIT_ERROR, format!("value {v} does not fit a {}-bit word", cfg.width)));
        }
        let k = k.trim();
        let slot = if let Some(&a) = l.vars.get(k) {
            s.mem.get_mut(a as usize)
        } else if let Some(a) = k.strip_prefix('m').and_then(|x| x.parse::<usize>().ok()) {
            s.mem.get_mut(a)
        } else if let Some(r) = k.strip_prefix('r').and_then(|x| x.parse::<usize>().ok()) {
            s.regs.get_mut(r)
        } else {
            None
        };
        *slot.ok_or_else(|| fail(EXIT_ERROR, format!("unknown location `{k}`")))? = v;
    }
    Ok(s)
}

fn cmd_run(a: &RunArgs) -> Result<String, Failure> {
    let l = load_machine(&a.asm, &a.machine)?;
    let script = match &a.faults {
        Some(p) => parse_fault_script(&read(p)?, &l.sys)?,
        None => BTreeMap::new(),
    };
    let mut s = l.sys.encode(&initial_state(&l, &a.mem)?);
    let layout = l.sys.layout();
    let mut out = String::new();
    for step in 1..=a.steps {
        if l.sys.step(&s).is_none() {
            break;
        }
        let faults = script.get(&step).cloned().unwrap_or_else(FaultSet::empty);
        let pc = l.sys.decode(&s).pc;
        let (act, next) = augmented_step_with(&l.sys, &s, &faults);
        writeln!(out, "{pc}; {act}; flipped={}", faults.render(layout)).expect("string write");
        s = next;
    }
    Ok(out)
}

fn scope_names(l: &Loaded, scope: &Option<String>) -> Option<Vec<String>> {
    let layout = l.sys.layout();
    match scope.as_deref() {
        Some("all") => None,
        Some(s) => Some(s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()),
        None => Some(verify::probe_scope(&l.sys).into_iter().map(|i| layout.location(i).name.clone()).collect()),
    }
}

fn budget_from_env() -> Result<u64, Failure> {
    match std::env::var("FTNI_BUDGET") {
        Ok(v) => v.trim().parse().map_err(|_| fail(EXIT_ERROR, format!("FTNI_BUDGET `{v}` is not a number"))),
        Err(_) => Ok(verify::DEFAULT_BUDGET),
    }
}

fn verify_failure(e: VerifyError) -> Failure {
    match e {
        VerifyError::Budget { .. } => fail(EXIT_BUDGET, e.to_string()),
        VerifyError::Config(m) => fail(EXIT_ERROR, m),
    }
}

fn cmd_check(a: &CheckArgs) -> Result<String, Failure> {
    if a.depth == 0 && a.mode != Mode::Ss {
        return Err(fail(EXIT_ERROR, "depth must be at least 1"));
    }
    let l = load_machine(&a.asm, &a.machine)?;
    let cfg = CheckConfig {
        scope: scope_names(&l, &a.scope),
        depth: a.depth,
        budget: budget_from_env()?,
        value_bound: a.value_bound,
    };
    let verdict = match a.mode {
        Mode::Ss => verify::check_strong_security(&l.sys, &cfg),
        Mode::Poni => verify::check_poni(&l.sys, &cfg),
        Mode::Pni => {
            let path = a.env.as_ref().ok_or_else(|| fail(EXIT_TYPE, "--mode pni requires --env"))?;
            let env = Environment::parse(&read(path)?, l.sys.layout())
                .map_err(|e| fail(EXIT_ERROR, format!("{}: {e}", path.display())))?;
            verify::check_pni(&l.sys, &env, &cfg)
        }
    }
    .map_err(verify_failure)?;
    let json = format!("{}\n", verdict.to_json());
    if verdict.is_secure() {
        Ok(json)
    } else {
        Err(Failure { code: EXIT_VIOLATION, stdout: json, message: String::new() })
    }
}

fn cmd_demo_hash(a: &DemoArgs) -> Result<String, Failure> {
    let c = compile_hash(a.width).map_err(|e| fail(EXIT_ERROR, e.to_string()))?;
    let mut out = String::new();
    let mut bad = 0;
    for x in HASH_SAMPLES {
        let want = hash_reference(x);
        let got = run_hash(&c, x, 1_000_000);
        let ok = got == Some(want);
        bad += usize::from(!ok);
        let shown = got.map_or("none".to_string(), |v| v.to_string());
        writeln!(
            out,
            "i={} j={} p={} q={} r={} m={}: machine {shown}, reference {want}, {}",
            x.i,
            x.j,
            x.p,
            x.q,
            x.r,
            x.m,
            if ok { "ok" } else { "MISMATCH" }
        )
        .expect("string write");
    }
    if bad > 0 {
        return Err(Failure { code: EXIT_MISMATCH, stdout: out, message: format!("{bad} mismatches") });
    }
    Ok(out)
}
