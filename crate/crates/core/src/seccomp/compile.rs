use std::collections::BTreeSet;
use std::fmt;

use crate::faultlab::Channel;
use crate::lang::{Cmd, Expr, Guard, SourceProgram, WhileMemory};
use crate::machine::{channel_level, Body, Instruction, MachineConfig, MachineError, MachineState, Program, Reg};

use super::{term_of, write_of, CmdAnnotation, Level, RegisterRecord, Timing, WriteEffect};

/// The typing rule a diagnostic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    K,
    VCached,
    VUncached,
    C,
    Skip,
    Assign,
    Out,
    IfAny,
    IfH,
    Seq,
    While,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::K => "K",
            Rule::VCached => "V-cached",
            Rule::VUncached => "V-uncached",
            Rule::C => "C",
            Rule::Skip => "skip",
            Rule::Assign => ":=",
            Rule::Out => "out",
            Rule::IfAny => "if-any",
            Rule::IfH => "if-H",
            Rule::Seq => "seq",
            Rule::While => "while",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TypeErrorKind {
    ImplicitFlow,
    TimingAfterHigh,
    LevelMismatch,
    NoRegister,
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeErrorKind::ImplicitFlow => "implicit flow",
            TypeErrorKind::TimingAfterHigh => "timing after high",
            TypeErrorKind::LevelMismatch => "level mismatch",
            TypeErrorKind::NoRegister => "no register",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("rule {rule}: {kind}: {detail} (in `{command}`)")]
pub struct TypeError {
    pub rule: Rule,
    pub kind: TypeErrorKind,
    pub detail: String,
    /// The offending sub-command, pretty-printed.
    pub command: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("compiled code is malformed: {0}")]
    Machine(#[from] MachineError),
    #[error("configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileOptions {
    pub width: u32,
    pub registers: Vec<Level>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { width: 8, registers: MachineConfig::default_registers() }
    }
}

/// Location of a padded high conditional in the compiled code. The then
/// region is `then_start..else_start`, the else region `else_start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IfHSite {
    pub start: usize,
    pub then_start: usize,
    pub else_start: usize,
    pub end: usize,
    pub then_pad: usize,
    pub else_pad: usize,
    pub steps: u64,
}

impl IfHSite {
    fn shifted(self, by: usize) -> Self {
        IfHSite {
            start: self.start + by,
            then_start: self.then_start + by,
            else_start: self.else_start + by,
            end: self.end + by,
            ..self
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompiledProgram {
    pub program: Program,
    pub annotation: CmdAnnotation,
    /// Set when a dangling exit label was attached to a trailing `nop`.
    pub exit_pad: bool,
    /// Variables with their addresses, in declaration order.
    pub v2p: Vec<(String, u64)>,
    pub registers: Vec<Level>,
    pub memory: Vec<Level>,
    pub jlez: bool,
    pub width: u32,
    pub if_h_sites: Vec<IfHSite>,
}

impl CompiledProgram {
    pub fn machine_config(&self) -> MachineConfig {
        MachineConfig::new(self.width, self.registers.clone(), self.memory.clone()).with_jlez(self.jlez)
    }

    /// Timing of the emitted program, counting the trailing `nop` if any.
    pub fn program_timing(&self) -> Timing {
        if self.exit_pad {
            self.annotation.timing.uplus(Timing::Trm(1))
        } else {
            self.annotation.timing
        }
    }

    pub fn address_of(&self, x: &str) -> Option<u64> {
        self.v2p.iter().find(|(v, _)| v == x).map(|(_, a)| *a)
    }

    /// Machine state at pc 0 with memory taken from `m` and zeroed registers.
    pub fn initial_state(&self, m: &WhileMemory) -> MachineState {
        let mut mem = vec![0; self.memory.len()];
        for (x, a) in &self.v2p {
            mem[*a as usize] = m.get(x).unwrap_or(0);
        }
        MachineState { pc: 0, regs: vec![0; self.registers.len()], mem }
    }

    /// The side-car describing the compilation, with sorted keys.
    pub fn metadata(&self) -> serde_json::Value {
        let v2p: serde_json::Map<String, serde_json::Value> =
            self.v2p.iter().map(|(x, a)| (x.clone(), serde_json::Value::from(*a))).collect();
        serde_json::json!({
            "timing": self.program_timing().to_string(),
            "write_effect": self.annotation.write.to_string(),
            "v2p": v2p,
            "register_levels": self.registers.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
            "memory_levels": self.memory.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
            "width": self.width,
            "jlez": self.jlez,
        })
    }
}

/// Code under construction. A pending label attaches to the next pushed
/// instruction, which is how the empty instruction and empty label are
/// represented.
#[derive(Debug, Default)]
struct Code {
    instrs: Vec<Instruction>,
    pending: Option<String>,
    sites: Vec<IfHSite>,
}

impl Code {
    fn new(pending: Option<String>) -> Self {
        Code { instrs: Vec::new(), pending, sites: Vec::new() }
    }

    fn len(&self) -> usize {
        self.instrs.len()
    }

    fn push(&mut self, body: Body) {
        let label = self.pending.take();
        self.instrs.push(Instruction { label, body });
    }

    fn append(&mut self, mut other: Code) {
        if let Some(first) = other.instrs.first_mut() {
            if let Some(l) = self.pending.take() {
                assert!(first.label.is_none(), "two labels on one instruction");
                first.label = Some(l);
            }
        } else if other.pending.is_some() {
            assert!(self.pending.is_none(), "two pending labels");
        }
        let off = self.instrs.len();
        self.sites.extend(other.sites.into_iter().map(|s| s.shifted(off)));
        self.instrs.append(&mut other.instrs);
        if other.pending.is_some() {
            self.pending = other.pending;
        }
    }
}

struct ExprOut {
    reg: Reg,
    steps: u64,
    phi: RegisterRecord,
}

enum ExprFail {
    /// A high variable was demanded at level L.
    TooHigh(String),
    NoRegister(Rule, Level),
}

struct CmdOut {
    code: Code,
    ann: CmdAnnotation,
    phi: RegisterRecord,
}

struct Compiler<'a> {
    src: &'a SourceProgram,
    regs: &'a [Level],
    mask: u64,
    counter: usize,
}

impl<'a> Compiler<'a> {
    fn fresh(&mut self, prefix: &str) -> String {
        let l = format!("{prefix}{}", self.counter);
        self.counter += 1;
        l
    }

    fn level(&self, x: &str) -> Level {
        self.src.level_of(x).expect("parser checks declarations")
    }

    fn addr(&self, x: &str) -> u64 {
        self.src.decls.iter().position(|(v, _)| v == x).expect("parser checks declarations") as u64
    }

    fn reg_level(&self, r: Reg) -> Level {
        self.regs[r.0]
    }

    /// Lowest-indexed register of level `lam` outside `avoid`, preferring
    /// registers that cache nothing.
    fn alloc(&self, phi: &RegisterRecord, avoid: &BTreeSet<Reg>, lam: Level) -> Option<Reg> {
        let free: Vec<Reg> =
            (0..self.regs.len()).map(Reg).filter(|r| self.regs[r.0] == lam && !avoid.contains(r)).collect();
        free.iter().copied().find(|r| phi.var_of(*r).is_none()).or_else(|| free.first().copied())
    }

    fn expr(
        &mut self,
        code: &mut Code,
        phi: &RegisterRecord,
        avoid: &BTreeSet<Reg>,
        e: &Expr,
        lam: Level,
    ) -> Result<ExprOut, ExprFail> {
        match e {
            Expr::Const(k) => {
                let r = self.alloc(phi, avoid, lam).ok_or(ExprFail::NoRegister(Rule::K, lam))?;
                code.push(Body::Movek(r, k & self.mask));
                Ok(ExprOut { reg: r, steps: 1, phi: phi.break_reg(r) })
            }
            Expr::Var(x) => {
                if let Some(r) = phi.reg_of(x) {
                    // a cached register in the avoid set holds an operand that a later op overwrites
                    if self.reg_level(r) == lam && !avoid.contains(&r) {
                        return Ok(ExprOut { reg: r, steps: 0, phi: phi.clone() });
                    }
                }
                if !self.level(x).leq(lam) {
                    return Err(ExprFail::TooHigh(x.clone()));
                }
                let r = self.alloc(phi, avoid, lam).ok_or(ExprFail::NoRegister(Rule::VUncached, lam))?;
                code.push(Body::Load { dst: r, addr: self.addr(x) });
                Ok(ExprOut { reg: r, steps: 1, phi: phi.update(r, x) })
            }
            Expr::Bin(op, a, b) => {
                let o1 = self.expr(code, phi, avoid, a, lam)?;
                let mut avoid2 = avoid.clone();
                avoid2.insert(o1.reg);
                let o2 = self.expr(code, &o1.phi, &avoid2, b, lam)?;
                code.push(Body::Op(*op, o1.reg, o2.reg));
                Ok(ExprOut { reg: o1.reg, steps: o1.steps + o2.steps + 1, phi: o2.phi.break_reg(o1.reg) })
            }
        }
    }

    fn expr_error(&self, f: ExprFail, rule: Rule, lam: Level, c: &Cmd) -> TypeError {
        match f {
            ExprFail::TooHigh(x) => TypeError {
                rule,
                kind: TypeErrorKind::LevelMismatch,
                detail: format!("expression must type at level {lam} but reads high variable `{x}`"),
                command: c.to_string(),
            },
            ExprFail::NoRegister(r, l) => TypeError {
                rule: r,
                kind: TypeErrorKind::NoRegister,
                detail: format!("no free level-{l} register"),
                command: c.to_string(),
            },
        }
    }

    fn cmd(&mut self, phi: &RegisterRecord, l: Option<String>, c: &Cmd) -> Result<CmdOut, TypeError> {
        match c {
            Cmd::Skip => {
                let mut code = Code::new(l);
                code.push(Body::Nop);
                Ok(CmdOut {
                    code,
                    ann: CmdAnnotation { timing: Timing::Trm(1), write: WriteEffect::High },
                    phi: phi.clone(),
                })
            }
            Cmd::Assign(x, e) => {
                let lam = self.level(x);
                let mut code = Code::new(l);
                let eo = self
                    .expr(&mut code, phi, &BTreeSet::new(), e, lam)
                    .map_err(|f| self.expr_error(f, Rule::Assign, lam, c))?;
                code.push(Body::Store { addr: self.addr(x), src: eo.reg });
                Ok(CmdOut { code, ann: atomic_annotation(lam, eo.steps), phi: eo.phi.update(eo.reg, x) })
            }
            Cmd::Out(ch, e) => {
                let lam = channel_level(*ch);
                let mut code = Code::new(l);
                let eo = self
                    .expr(&mut code, phi, &BTreeSet::new(), e, lam)
                    .map_err(|f| self.expr_error(f, Rule::Out, lam, c))?;
                code.push(Body::Out(*ch, eo.reg));
                Ok(CmdOut { code, ann: atomic_annotation(lam, eo.steps), phi: eo.phi })
            }
            Cmd::Seq(a, b) => {
                let mut o1 = self.cmd(phi, l, a)?;
                let mid = o1.code.pending.take();
                let o2 = self.cmd(&o1.phi, mid, b)?;
                if o1.ann.timing == Timing::High && o2.ann.write != WriteEffect::High {
                    return Err(TypeError {
                        rule: Rule::Seq,
                        kind: TypeErrorKind::TimingAfterHigh,
                        detail: format!(
                            "first command has timing {} so the second must have write effect w H, found {}",
                            o1.ann.timing, o2.ann.write
                        ),
                        command: c.to_string(),
                    });
                }
                o1.code.append(o2.code);
                Ok(CmdOut {
                    code: o1.code,
                    ann: CmdAnnotation {
                        timing: o1.ann.timing.uplus(o2.ann.timing),
                        write: o1.ann.write.join(o2.ann.write),
                    },
                    phi: o2.phi,
                })
            }
            Cmd::If(e, a, b) => {
                let saved = self.counter;
                if let Some(out) = self.try_if_h(phi, l.clone(), e, a, b) {
                    return Ok(out);
                }
                self.counter = saved;
                self.if_any(phi, l, e, a, b, c)
            }
            Cmd::While(g, x, body) => self.while_(phi, l, *g, x, body, c),
            Cmd::Done => Ok(CmdOut {
                code: Code::new(l),
                ann: CmdAnnotation { timing: Timing::Trm(0), write: WriteEffect::High },
                phi: phi.clone(),
            }),
        }
    }

    /// The padded high conditional, or `None` when its premises fail.
    fn try_if_h(&mut self, phi: &RegisterRecord, l: Option<String>, e: &Expr, a: &Cmd, b: &Cmd) -> Option<CmdOut> {
        let mut code = Code::new(l);
        let eo = self.expr(&mut code, phi, &BTreeSet::new(), e, Level::H).ok()?;
        let n0 = eo.steps;
        let br = self.fresh("br");
        let ex = self.fresh("ex");
        code.push(Body::Jz(br.clone(), eo.reg));
        let o1 = self.cmd(&eo.phi, None, a).ok()?;
        let o2 = self.cmd(&eo.phi, Some(br), b).ok()?;
        let (n1, n2) = match (o1.ann, o2.ann) {
            (
                CmdAnnotation { timing: Timing::Trm(n1), write: WriteEffect::High },
                CmdAnnotation { timing: Timing::Trm(n2), write: WriteEffect::High },
            ) => (n1, n2),
            _ => return None,
        };
        let then_start = code.len();
        code.append(o1.code);
        for _ in n1..n2 {
            code.push(Body::Nop);
        }
        code.push(Body::Jmp(ex.clone()));
        let else_start = code.len();
        code.append(o2.code);
        for _ in n2..n1 {
            code.push(Body::Nop);
        }
        code.push(Body::Nop);
        let end = code.len();
        code.pending = Some(ex);
        let steps = n0 + n1.max(n2) + 2;
        code.sites.push(IfHSite {
            start: 0,
            then_start,
            else_start,
            end,
            then_pad: n2.saturating_sub(n1) as usize,
            else_pad: n1.saturating_sub(n2) as usize,
            steps,
        });
        Some(CmdOut {
            code,
            ann: CmdAnnotation { timing: Timing::Trm(steps), write: WriteEffect::High },
            phi: o1.phi.meet(&o2.phi),
        })
    }

    fn if_any(
        &mut self,
        phi: &RegisterRecord,
        l: Option<String>,
        e: &Expr,
        a: &Cmd,
        b: &Cmd,
        c: &Cmd,
    ) -> Result<CmdOut, TypeError> {
        let mut code = Code::new(l.clone());
        let (lam, eo) = match self.expr(&mut code, phi, &BTreeSet::new(), e, Level::L) {
            Ok(eo) => (Level::L, eo),
            Err(_) => {
                code = Code::new(l);
                let eo = self
                    .expr(&mut code, phi, &BTreeSet::new(), e, Level::H)
                    .map_err(|f| self.expr_error(f, Rule::IfAny, Level::H, c))?;
                (Level::H, eo)
            }
        };
        let br = self.fresh("br");
        let ex = self.fresh("ex");
        code.push(Body::Jz(br.clone(), eo.reg));
        let o1 = self.cmd(&eo.phi, None, a)?;
        let o2 = self.cmd(&eo.phi, Some(br), b)?;
        let allowed = write_of(lam);
        for (o, which) in [(&o1, "then"), (&o2, "else")] {
            if !o.ann.write.leq(allowed) {
                return Err(TypeError {
                    rule: Rule::IfAny,
                    kind: TypeErrorKind::ImplicitFlow,
                    detail: format!(
                        "guard has level {lam} so the {which} branch must have write effect {allowed}, found {}",
                        o.ann.write
                    ),
                    command: c.to_string(),
                });
            }
        }
        let timing = term_of(lam).join_minus(o1.ann.timing).join_minus(o2.ann.timing);
        let phi_out = o1.phi.meet(&o2.phi);
        code.append(o1.code);
        code.push(Body::Jmp(ex.clone()));
        code.append(o2.code);
        code.push(Body::Nop);
        code.pending = Some(ex);
        Ok(CmdOut { code, ann: CmdAnnotation { timing, write: allowed }, phi: phi_out })
    }

    fn while_(
        &mut self,
        phi: &RegisterRecord,
        l: Option<String>,
        g: Guard,
        x: &str,
        body: &Cmd,
        c: &Cmd,
    ) -> Result<CmdOut, TypeError> {
        let lam = self.level(x);
        let r = match phi.reg_of(x).filter(|r| self.reg_level(*r) == lam) {
            Some(r) => r,
            None => self.alloc(phi, &BTreeSet::new(), lam).ok_or_else(|| TypeError {
                rule: Rule::While,
                kind: TypeErrorKind::NoRegister,
                detail: format!("no level-{lam} register for the guard"),
                command: c.to_string(),
            })?,
        };
        let (phi_b, ob, lp, ex, _) = fixpoint_while_record(self, phi, body, r, x)?;
        if !ob.ann.write.leq(write_of(lam)) {
            return Err(TypeError {
                rule: Rule::While,
                kind: TypeErrorKind::ImplicitFlow,
                detail: format!(
                    "guard `{x}` has level {lam} so the body must have write effect w H, found {}",
                    ob.ann.write
                ),
                command: c.to_string(),
            });
        }
        if ob.ann.timing == Timing::High && lam == Level::L {
            return Err(TypeError {
                rule: Rule::While,
                kind: TypeErrorKind::TimingAfterHigh,
                detail: format!("body has timing Trm H under the low guard `{x}`"),
                command: c.to_string(),
            });
        }
        let addr = self.addr(x);
        let mut code = Code::new(l);
        code.push(Body::Load { dst: r, addr });
        code.push(Body::Store { addr, src: r });
        code.pending = Some(lp.clone());
        code.push(match g {
            Guard::NonZero => Body::Jz(ex.clone(), r),
            Guard::Positive => Body::Jlez(ex.clone(), r),
        });
        code.append(ob.code);
        code.push(Body::Load { dst: r, addr });
        code.push(Body::Store { addr, src: r });
        code.push(Body::Jmp(lp));
        code.pending = Some(ex);
        Ok(CmdOut {
            code,
            ann: CmdAnnotation { timing: term_of(lam).join_minus(ob.ann.timing), write: write_of(lam) },
            phi: phi_b,
        })
    }
}

fn atomic_annotation(lam: Level, n: u64) -> CmdAnnotation {
    match lam {
        Level::H => CmdAnnotation { timing: Timing::Trm(n + 1), write: WriteEffect::High },
        Level::L => CmdAnnotation { timing: Timing::Low, write: WriteEffect::Any },
    }
}

/// Finds the loop-head record: start from `Φ[r↔x]` and intersect with the
/// record after the body until stable. The label counter is rewound before
/// each retry so the emitted labels do not depend on the iteration count.
fn fixpoint_while_record(
    comp: &mut Compiler<'_>,
    phi: &RegisterRecord,
    body: &Cmd,
    r: Reg,
    x: &str,
) -> Result<(RegisterRecord, CmdOut, String, String, usize), TypeError> {
    let start = comp.counter;
    let mut phi_b = phi.update(r, x);
    let bound = phi_b.len() + 1;
    for k in 1..=bound + 1 {
        comp.counter = start;
        let lp = comp.fresh("lp");
        let ex = comp.fresh("ex");
        let ob = comp.cmd(&phi_b, None, body)?;
        let next = phi_b.meet(&ob.phi.update(r, x));
        if next == phi_b {
            return Ok((phi_b, ob, lp, ex, k));
        }
        phi_b = next;
    }
    unreachable!("record chain is strictly decreasing and finite")
}

/// Compiles from the empty record and empty label.
pub fn compile_program(src: &SourceProgram, opts: &CompileOptions) -> Result<CompiledProgram, CompileError> {
    if opts.width == 0 || opts.width > crate::machine::MAX_WIDTH {
        return Err(CompileError::Config(format!("word width {} unsupported", opts.width)));
    }
    let mut comp = Compiler { src, regs: &opts.registers, mask: mask_of(opts.width), counter: 0 };
    let out = comp.cmd(&RegisterRecord::new(), None, &src.body)?;
    let mut code = out.code;
    let exit_pad = code.pending.is_some();
    if exit_pad {
        code.push(Body::Nop);
    }
    let program = Program::new(code.instrs)?;
    let compiled = CompiledProgram {
        program,
        annotation: out.ann,
        exit_pad,
        v2p: src.decls.iter().enumerate().map(|(i, (x, _))| (x.clone(), i as u64)).collect(),
        registers: opts.registers.clone(),
        memory: src.decls.iter().map(|(_, l)| *l).collect(),
        jlez: src.uses_positive_guard(),
        width: opts.width,
        if_h_sites: code.sites,
    };
    compiled.machine_config().validate(&compiled.program)?;
    Ok(compiled)
}

/// Result of compiling a single expression.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    pub code: Vec<Instruction>,
    pub level: Level,
    pub steps: u64,
    pub reg: Reg,
    pub record: RegisterRecord,
}

/// Compiles `e` at demanded level `lam` under record `phi` and avoid set `avoid`.
pub fn compile_expr(
    src: &SourceProgram,
    opts: &CompileOptions,
    phi: &RegisterRecord,
    avoid: &BTreeSet<Reg>,
    e: &Expr,
    lam: Level,
) -> Result<CompiledExpr, TypeError> {
    let mut comp = Compiler { src, regs: &opts.registers, mask: mask_of(opts.width), counter: 0 };
    let mut code = Code::new(None);
    let c = Cmd::Out(if lam == Level::L { Channel::Low } else { Channel::High }, e.clone());
    let eo = comp.expr(&mut code, phi, avoid, e, lam).map_err(|f| comp.expr_error(f, Rule::C, lam, &c))?;
    Ok(CompiledExpr { code: code.instrs, level: lam, steps: eo.steps, reg: eo.reg, record: eo.phi })
}

/// Result of compiling a command fragment.
#[derive(Debug, Clone)]
pub struct CompiledCmd {
    pub code: Vec<Instruction>,
    pub annotation: CmdAnnotation,
    /// Label owed to the instruction that follows the fragment.
    pub exit_label: Option<String>,
    pub record: RegisterRecord,
    pub if_h_sites: Vec<IfHSite>,
}

/// Compiles `c` from record `phi` and incoming label `l`.
pub fn compile_cmd(
    src: &SourceProgram,
    opts: &CompileOptions,
    phi: &RegisterRecord,
    l: Option<String>,
    c: &Cmd,
) -> Result<CompiledCmd, TypeError> {
    let mut comp = Compiler { src, regs: &opts.registers, mask: mask_of(opts.width), counter: 0 };
    let out = comp.cmd(phi, l, c)?;
    Ok(CompiledCmd {
        code: out.code.instrs,
        annotation: out.ann,
        exit_label: out.code.pending,
        record: out.phi,
        if_h_sites: out.code.sites,
    })
}

/// The loop-head record for `while x do body` with guard register `r`, and
/// the number of body compilations it took.
pub fn while_record(
    src: &SourceProgram,
    opts: &CompileOptions,
    phi: &RegisterRecord,
    body: &Cmd,
    r: Reg,
    x: &str,
) -> Result<(RegisterRecord, usize), TypeError> {
    let mut comp = Compiler { src, regs: &opts.registers, mask: mask_of(opts.width), counter: 0 };
    let (phi_b, _, _, _, iterations) = fixpoint_while_record(&mut comp, phi, body, r, x)?;
    Ok((phi_b, iterations))
}

fn mask_of(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}
