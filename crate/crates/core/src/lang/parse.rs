use std::collections::HashSet;

use crate::faultlab::Channel;
use crate::machine::BinOp;
use crate::seccomp::Level;

use super::{Cmd, Expr, Guard, LangError, SourceProgram};

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept `while x > 0 do C`.
    pub jlez: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tk {
    Ident(String),
    Num(u64),
    Sym(&'static str),
    Eof,
}

const KEYWORDS: &[&str] = &["low", "high", "skip", "if", "then", "else", "out", "while", "do"];
const SYMBOLS: &[&str] = &[":=", ";", "{", "}", "(", ")", "+", "-", "*", "&", ">"];

struct Token {
    tk: Tk,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, LangError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let src = raw.split('#').next().unwrap_or("");
        let bytes = src.as_bytes();
        let mut j = 0;
        while j < bytes.len() {
            let c = bytes[j] as char;
            let col = j + 1;
            if c.is_whitespace() {
                j += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let s = j;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                out.push(Token { tk: Tk::Ident(src[s..j].to_string()), line, col });
            } else if c.is_ascii_digit() {
                let s = j;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                let n = src[s..j].parse().map_err(|_| LangError::Syntax {
                    line,
                    col,
                    msg: format!("constant `{}` too large", &src[s..j]),
                })?;
                out.push(Token { tk: Tk::Num(n), line, col });
            } else if let Some(sym) = SYMBOLS.iter().find(|s| src[j..].starts_with(**s)) {
                out.push(Token { tk: Tk::Sym(sym), line, col });
                j += sym.len();
            } else {
                return Err(LangError::Syntax { line, col, msg: format!("unexpected character `{c}`") });
            }
        }
    }
    let (line, col) = out.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1));
    out.push(Token { tk: Tk::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    opts: ParseOptions,
    declared: HashSet<String>,
}

impl Parser {
    fn peek(&self) -> &Tk {
        &self.toks[self.pos].tk
    }

    fn peek_at(&self, k: usize) -> &Tk {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tk
    }

    fn err(&self, msg: impl Into<String>) -> LangError {
        let t = &self.toks[self.pos];
        LangError::Syntax { line: t.line, col: t.col, msg: msg.into() }
    }

    fn bump(&mut self) -> Tk {
        let t = self.toks[self.pos].tk.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tk::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), LangError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected `{kw}`")))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tk::Sym(x) if *x == s)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), LangError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected `{s}`")))
        }
    }

    fn ident(&mut self) -> Result<String, LangError> {
        match self.peek().clone() {
            Tk::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.err("expected a variable name")),
        }
    }

    fn use_var(&mut self) -> Result<String, LangError> {
        let x = self.ident()?;
        if !self.declared.contains(&x) {
            self.pos -= 1;
            let t = &self.toks[self.pos];
            return Err(LangError::Undeclared { name: x, line: t.line, col: t.col });
        }
        Ok(x)
    }

    fn channel(&mut self) -> Result<Channel, LangError> {
        if self.is_kw("low") {
            self.bump();
            Ok(Channel::Low)
        } else if self.is_kw("high") {
            self.bump();
            Ok(Channel::High)
        } else {
            Err(self.err("expected `low` or `high`"))
        }
    }

    fn program(&mut self) -> Result<SourceProgram, LangError> {
        let mut decls = Vec::new();
        while (self.is_kw("low") || self.is_kw("high")) && matches!(self.peek_at(2), Tk::Sym(";")) {
            let level = if self.is_kw("low") { Level::L } else { Level::H };
            self.bump();
            let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
            let x = self.ident()?;
            if !self.declared.insert(x.clone()) {
                return Err(LangError::Duplicate { name: x, line, col });
            }
            self.expect_sym(";")?;
            decls.push((x, level));
        }
        let body = self.stmts()?;
        if *self.peek() != Tk::Eof {
            return Err(self.err("expected `;` or end of input"));
        }
        Ok(SourceProgram { decls, body })
    }

    fn stmts(&mut self) -> Result<Cmd, LangError> {
        let mut cmds = vec![self.stmt()?];
        while self.is_sym(";") {
            self.bump();
            if *self.peek() == Tk::Eof || self.is_sym("}") {
                break;
            }
            cmds.push(self.stmt()?);
        }
        Ok(Cmd::seq_all(cmds))
    }

    fn block(&mut self) -> Result<Cmd, LangError> {
        self.stmt()
    }

    fn stmt(&mut self) -> Result<Cmd, LangError> {
        if self.is_sym("{") {
            self.bump();
            let c = self.stmts()?;
            self.expect_sym("}")?;
            return Ok(c);
        }
        let kw = match self.peek() {
            Tk::Ident(s) => s.clone(),
            _ => return Err(self.err("expected a statement")),
        };
        match kw.as_str() {
            "skip" => {
                self.bump();
                Ok(Cmd::Skip)
            }
            "if" => {
                self.bump();
                let e = self.expr()?;
                self.expect_kw("then")?;
                let a = self.block()?;
                self.expect_kw("else")?;
                let b = self.block()?;
                Ok(Cmd::if_(e, a, b))
            }
            "out" => {
                self.bump();
                let ch = self.channel()?;
                Ok(Cmd::Out(ch, self.expr()?))
            }
            "while" => {
                self.bump();
                let x = self.use_var()?;
                let guard = if self.is_sym(">") {
                    if !self.opts.jlez {
                        return Err(self.err("`while x > 0` needs the jlez extension"));
                    }
                    self.bump();
                    if self.bump() != Tk::Num(0) {
                        self.pos -= 1;
                        return Err(self.err("only `> 0` comparisons are supported"));
                    }
                    Guard::Positive
                } else {
                    Guard::NonZero
                };
                if !self.is_kw("do") {
                    return Err(self.err("while guard must be a single variable followed by `do`"));
                }
                self.bump();
                let body = self.block()?;
                Ok(Cmd::While(guard, x, Box::new(body)))
            }
            _ => {
                let x = self.use_var()?;
                self.expect_sym(":=")?;
                Ok(Cmd::Assign(x, self.expr()?))
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, LangError> {
        self.binary(1)
    }

    fn binary(&mut self, min: u8) -> Result<Expr, LangError> {
        if min > 3 {
            return self.atom();
        }
        let mut lhs = self.binary(min + 1)?;
        loop {
            let op = match (self.peek(), min) {
                (Tk::Sym("&"), 1) => BinOp::And,
                (Tk::Sym("+"), 2) => BinOp::Add,
                (Tk::Sym("-"), 2) => BinOp::Sub,
                (Tk::Sym("*"), 3) => BinOp::Mul,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.binary(min + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn atom(&mut self) -> Result<Expr, LangError> {
        match self.peek().clone() {
            Tk::Num(n) => {
                self.bump();
                Ok(Expr::Const(n))
            }
            Tk::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tk::Ident(_) => Ok(Expr::Var(self.use_var()?)),
            _ => Err(self.err("expected an expression")),
        }
    }
}

pub fn parse(text: &str) -> Result<SourceProgram, LangError> {
    parse_with(text, ParseOptions::default())
}

pub fn parse_with(text: &str, opts: ParseOptions) -> Result<SourceProgram, LangError> {
    let toks = lex(text)?;
    Parser { toks, pos: 0, opts, declared: HashSet::new() }.program()
}
