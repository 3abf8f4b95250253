use std::collections::BTreeMap;

use crate::faultlab::Action;
use crate::machine::signed_le_zero;
use crate::seccomp::Level;

use super::{Cmd, Expr, Guard, LangError, SourceProgram};

/// Values of the declared variables, all words of a fixed width.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WhileMemory {
    width: u32,
    values: BTreeMap<String, u64>,
}

impl WhileMemory {
    /// All variables of `p` set to zero.
    pub fn zeroed(p: &SourceProgram, width: u32) -> Self {
        WhileMemory { width, values: p.decls.iter().map(|(x, _)| (x.clone(), 0)).collect() }
    }

    pub fn from_values(width: u32, values: impl IntoIterator<Item = (String, u64)>) -> Self {
        let mask = mask(width);
        WhileMemory { width, values: values.into_iter().map(|(k, v)| (k, v & mask)).collect() }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn get(&self, x: &str) -> Option<u64> {
        self.values.get(x).copied()
    }

    pub fn set(&mut self, x: &str, v: u64) -> Result<(), LangError> {
        let m = mask(self.width);
        let slot = self.values.get_mut(x).ok_or_else(|| LangError::unbound(x))?;
        *slot = v & m;
        Ok(())
    }

    pub fn values(&self) -> &BTreeMap<String, u64> {
        &self.values
    }

    /// Equality on the low variables of `p`.
    pub fn low_equal(&self, other: &WhileMemory, p: &SourceProgram) -> bool {
        p.decls.iter().filter(|(_, l)| *l == Level::L).all(|(x, _)| self.get(x) == other.get(x))
    }
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

pub fn eval_expr(e: &Expr, m: &WhileMemory) -> Result<u64, LangError> {
    let mk = mask(m.width);
    Ok(match e {
        Expr::Const(k) => k & mk,
        Expr::Var(x) => m.get(x).ok_or_else(|| LangError::unbound(x))?,
        Expr::Bin(op, a, b) => op.apply(eval_expr(a, m)?, eval_expr(b, m)?, mk),
    })
}

/// One small step, updating `m` in place. `Ok(None)` on the terminated command.
pub fn step_in_place(c: Cmd, m: &mut WhileMemory) -> Result<Option<(Action, Cmd)>, LangError> {
    Ok(Some(match c {
        Cmd::Done => return Ok(None),
        Cmd::Skip => (Action::Tau, Cmd::Done),
        Cmd::Assign(x, e) => {
            let v = eval_expr(&e, m)?;
            m.set(&x, v)?;
            (Action::Tau, Cmd::Done)
        }
        Cmd::Out(ch, e) => (Action::Out(ch, eval_expr(&e, m)?), Cmd::Done),
        Cmd::If(e, a, b) => {
            let branch = if eval_expr(&e, m)? != 0 { a } else { b };
            (Action::Tau, *branch)
        }
        Cmd::While(g, x, body) => {
            let v = m.get(&x).ok_or_else(|| LangError::unbound(&x))?;
            let go = match g {
                Guard::NonZero => v != 0,
                Guard::Positive => !signed_le_zero(v, m.width),
            };
            if go {
                (Action::Tau, Cmd::seq((*body).clone(), Cmd::While(g, x, body)))
            } else {
                (Action::Tau, Cmd::Done)
            }
        }
        Cmd::Seq(a, b) => match step_in_place(*a, m)? {
            // c-2: the first command finished in this step
            Some((act, Cmd::Done)) => (act, *b),
            Some((act, a2)) => (act, Cmd::Seq(Box::new(a2), b)),
            None => return step_in_place(*b, m),
        },
    }))
}

/// Pure form of [`step_in_place`].
pub fn step_while(c: &Cmd, m: &WhileMemory) -> Result<Option<(Action, Cmd, WhileMemory)>, LangError> {
    let mut m2 = m.clone();
    Ok(step_in_place(c.clone(), &mut m2)?.map(|(a, c2)| (a, c2, m2)))
}

/// Result of a bounded run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WhileRun {
    pub actions: Vec<Action>,
    pub memory: WhileMemory,
    pub steps: usize,
    pub terminated: bool,
}

pub fn run_while(c: &Cmd, mut m: WhileMemory, budget: usize) -> Result<WhileRun, LangError> {
    let mut cur = c.clone();
    let mut actions = Vec::new();
    for steps in 0..budget {
        match step_in_place(cur, &mut m)? {
            Some((a, next)) => {
                actions.push(a);
                cur = next;
            }
            None => return Ok(WhileRun { actions, memory: m, steps, terminated: true }),
        }
    }
    let terminated = cur == Cmd::Done;
    Ok(WhileRun { actions, memory: m, steps: budget, terminated })
}
