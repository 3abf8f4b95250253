//! Text assembly: one instruction per line, optional `label:` prefix,
//! `#` comments. A line holding only a label attaches it to the next
//! instruction.

use crate::faultlab::Channel;

use super::{BinOp, Body, Instruction, MachineError, Program, Reg};

struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokens(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() || c == ',' {
            if let Some(s) = start.take() {
                out.push(Tok { text: &line[s..i], col: s + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok { text: &line[s..], col: s + 1 });
    }
    out
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct LineParser<'a> {
    line: usize,
    toks: Vec<Tok<'a>>,
    pos: usize,
    end_col: usize,
}

impl<'a> LineParser<'a> {
    fn err(&self, col: usize, msg: impl Into<String>) -> MachineError {
        MachineError::Parse { line: self.line, col, msg: msg.into() }
    }

    fn next(&mut self, what: &str) -> Result<&Tok<'a>, MachineError> {
        let t = self.toks.get(self.pos).ok_or_else(|| self.err(self.end_col, format!("expected {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn reg(&mut self) -> Result<Reg, MachineError> {
        let t = self.next("register")?;
        let (text, col) = (t.text, t.col);
        text.strip_prefix('r')
            .and_then(|n| n.parse::<usize>().ok())
            .map(Reg)
            .ok_or_else(|| self.err(col, format!("expected register, found `{text}`")))
    }

    fn num(&mut self, what: &str) -> Result<u64, MachineError> {
        let t = self.next(what)?;
        let (text, col) = (t.text, t.col);
        text.parse::<u64>().map_err(|_| self.err(col, format!("expected {what}, found `{text}`")))
    }

    fn label(&mut self) -> Result<String, MachineError> {
        let t = self.next("label")?;
        let (text, col) = (t.text, t.col);
        if is_ident(text) {
            Ok(text.to_string())
        } else {
            Err(self.err(col, format!("expected label, found `{text}`")))
        }
    }

    fn channel(&mut self) -> Result<Channel, MachineError> {
        let t = self.next("channel")?;
        let (text, col) = (t.text, t.col);
        match text {
            "low" => Ok(Channel::Low),
            "high" => Ok(Channel::High),
            _ => Err(self.err(col, format!("expected `low` or `high`, found `{text}`"))),
        }
    }

    fn body(&mut self) -> Result<Body, MachineError> {
        let t = self.next("mnemonic")?;
        let (m, col) = (t.text, t.col);
        let body = match m {
            "load" => Body::Load { dst: self.reg()?, addr: self.num("address")? },
            "store" => Body::Store { addr: self.num("address")?, src: self.reg()? },
            "jmp" => Body::Jmp(self.label()?),
            "jz" => Body::Jz(self.label()?, self.reg()?),
            "jlez" => Body::Jlez(self.label()?, self.reg()?),
            "nop" => Body::Nop,
            "movek" => Body::Movek(self.reg()?, self.num("constant")?),
            "mover" => Body::Mover(self.reg()?, self.reg()?),
            "add" => Body::Op(BinOp::Add, self.reg()?, self.reg()?),
            "sub" => Body::Op(BinOp::Sub, self.reg()?, self.reg()?),
            "mul" => Body::Op(BinOp::Mul, self.reg()?, self.reg()?),
            "and" => Body::Op(BinOp::And, self.reg()?, self.reg()?),
            "out" => Body::Out(self.channel()?, self.reg()?),
            _ => return Err(self.err(col, format!("unknown mnemonic `{m}`"))),
        };
        if let Some(t) = self.toks.get(self.pos) {
            return Err(self.err(t.col, format!("unexpected `{}`", t.text)));
        }
        Ok(body)
    }
}

/// Parses assembly text into a well-formed program.
pub fn assemble(text: &str) -> Result<Program, MachineError> {
    let mut instrs = Vec::new();
    let mut label_lines: Vec<String> = Vec::new();
    let mut pending: Option<(String, usize)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let code = raw.split('#').next().unwrap_or("");
        let mut toks = tokens(code);
        if toks.is_empty() {
            continue;
        }
        if let Some(l) = toks[0].text.strip_suffix(':') {
            if !is_ident(l) {
                return Err(MachineError::Parse { line, col: toks[0].col, msg: format!("bad label `{l}`") });
            }
            if let Some((prev, _)) = &pending {
                return Err(MachineError::Parse {
                    line,
                    col: toks[0].col,
                    msg: format!("label `{l}` follows label `{prev}` with no instruction between"),
                });
            }
            pending = Some((l.to_string(), line));
            toks.remove(0);
            if toks.is_empty() {
                continue;
            }
        }
        let mut p = LineParser { line, toks, pos: 0, end_col: code.trim_end().len() + 1 };
        let body = p.body()?;
        let label = pending.take();
        if let Some((l, at)) = &label {
            if label_lines.contains(l) {
                return Err(MachineError::DuplicateLabel { label: l.clone(), line: Some(*at) });
            }
            label_lines.push(l.clone());
        }
        instrs.push(Instruction { label: label.map(|(l, _)| l), body });
    }
    if let Some((l, line)) = pending {
        return Err(MachineError::Parse {
            line,
            col: 1,
            msg: format!("label `{l}` is not followed by an instruction"),
        });
    }
    Program::new(instrs)
}

/// Canonical text of a program; `assemble` reads it back unchanged.
pub fn disassemble(p: &Program) -> String {
    p.to_string()
}
