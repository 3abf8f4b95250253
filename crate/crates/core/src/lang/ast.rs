use std::fmt;

use crate::faultlab::Channel;
use crate::machine::BinOp;
use crate::seccomp::Level;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(u64),
    Var(String),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(x: &str) -> Self {
        Expr::Var(x.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(x) => out.push(x.clone()),
            Expr::Bin(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }
}

/// How a while loop tests its guard variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Guard {
    /// `while x do C`: loop while x ≠ 0.
    NonZero,
    /// `while x > 0 do C`: loop while x, read as two's complement, is positive.
    Positive,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cmd {
    Skip,
    Assign(String, Expr),
    If(Expr, Box<Cmd>, Box<Cmd>),
    Out(Channel, Expr),
    Seq(Box<Cmd>, Box<Cmd>),
    While(Guard, String, Box<Cmd>),
    /// The terminated command.
    Done,
}

impl Cmd {
    pub fn seq(a: Cmd, b: Cmd) -> Self {
        Cmd::Seq(Box::new(a), Box::new(b))
    }

    /// Right-nested sequence of `cmds`; `skip` when empty.
    pub fn seq_all(cmds: Vec<Cmd>) -> Self {
        let mut it = cmds.into_iter().rev();
        let Some(last) = it.next() else { return Cmd::Skip };
        it.fold(last, |acc, c| Cmd::seq(c, acc))
    }

    pub fn if_(e: Expr, a: Cmd, b: Cmd) -> Self {
        Cmd::If(e, Box::new(a), Box::new(b))
    }

    pub fn while_(x: &str, body: Cmd) -> Self {
        Cmd::While(Guard::NonZero, x.to_string(), Box::new(body))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceProgram {
    /// Declared variables with their levels, in declaration order.
    pub decls: Vec<(String, Level)>,
    pub body: Cmd,
}

impl SourceProgram {
    pub fn level_of(&self, x: &str) -> Option<Level> {
        self.decls.iter().find(|(v, _)| v == x).map(|(_, l)| *l)
    }

    pub fn uses_positive_guard(&self) -> bool {
        fn go(c: &Cmd) -> bool {
            match c {
                Cmd::While(g, _, b) => *g == Guard::Positive || go(b),
                Cmd::If(_, a, b) | Cmd::Seq(a, b) => go(a) || go(b),
                _ => false,
            }
        }
        go(&self.body)
    }
}

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::And => 1,
        BinOp::Add | BinOp::Sub => 2,
        BinOp::Mul => 3,
    }
}

fn symbol(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::And => "&",
    }
}

fn fmt_expr(e: &Expr, ctx: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Const(k) => write!(f, "{k}"),
        Expr::Var(x) => f.write_str(x),
        Expr::Bin(op, a, b) => {
            let p = prec(*op);
            if p < ctx {
                f.write_str("(")?;
            }
            fmt_expr(a, p, f)?;
            write!(f, " {} ", symbol(*op))?;
            // operators are left-associative, so an equal-precedence right operand needs parentheses
            fmt_expr(b, p + 1, f)?;
            if p < ctx {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_expr(self, 0, f)
    }
}

fn fmt_block(c: &Cmd, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if matches!(c, Cmd::Seq(..)) {
        write!(f, "{{ {c} }}")
    } else {
        write!(f, "{c}")
    }
}

impl fmt::Display for Cmd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cmd::Skip => f.write_str("skip"),
            Cmd::Assign(x, e) => write!(f, "{x} := {e}"),
            Cmd::If(e, a, b) => {
                write!(f, "if {e} then ")?;
                fmt_block(a, f)?;
                f.write_str(" else ")?;
                fmt_block(b, f)
            }
            Cmd::Out(ch, e) => write!(f, "out {ch} {e}"),
            Cmd::Seq(a, b) => {
                fmt_block(a, f)?;
                write!(f, "; {b}")
            }
            Cmd::While(g, x, body) => {
                match g {
                    Guard::NonZero => write!(f, "while {x} do ")?,
                    Guard::Positive => write!(f, "while {x} > 0 do ")?,
                }
                fmt_block(body, f)
            }
            Cmd::Done => f.write_str("done"),
        }
    }
}

impl fmt::Display for SourceProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (x, l) in &self.decls {
            let kw = match l {
                Level::L => "low",
                Level::H => "high",
            };
            writeln!(f, "{kw} {x};")?;
        }
        writeln!(f, "{}", self.body)
    }
}
