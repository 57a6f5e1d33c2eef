//! The event-driven language and its `.edp` text format.
//!
//! ```text
//! # comment
//! vars x y=3
//! handler h regs a b=1 init start
//! msg start on h:
//!   a = x              # read shared x into register a
//!   L: a = a + 1
//!   if a < 3 goto L
//!   x = a              # write register a to shared x
//!   post g work
//!   last
//! ```
//!
//! `lhs = rhs` is a write when `lhs` is a shared variable (then `rhs` must be
//! a register), a read when `lhs` is a register and `rhs` a lone shared
//! variable, and a local assignment otherwise. Expressions use registers,
//! integer constants, `+ - * == != < <=` and parentheses; conditions are
//! true when non-zero. Unset values start at 0.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub type VarId = usize;
pub type RegId = usize;
pub type MsgId = usize;

/// Reserved for the synthetic handler that performs initial writes.
pub const INIT_HANDLER: &str = "__init";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
}

impl BinOp {
    pub fn apply(self, a: i64, b: i64) -> i64 {
        match self {
            BinOp::Add => a.wrapping_add(b),
            BinOp::Sub => a.wrapping_sub(b),
            BinOp::Mul => a.wrapping_mul(b),
            BinOp::Eq => (a == b) as i64,
            BinOp::Ne => (a != b) as i64,
            BinOp::Lt => (a < b) as i64,
            BinOp::Le => (a <= b) as i64,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Const(i64),
    Reg(RegId),
    Bin(Box<Expr>, BinOp, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, regs: &[i64]) -> i64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Reg(r) => regs[*r],
            Expr::Bin(a, op, b) => op.apply(a.eval(regs), b.eval(regs)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    /// `x = a`
    Write { var: VarId, reg: RegId },
    /// `a = x`
    Read { reg: RegId, var: VarId },
    /// `a = exp`
    Assign { reg: RegId, exp: Expr },
    IfGoto { cond: Expr, target: usize },
    Goto { target: usize },
    Post { handler: usize, msg: MsgId },
    Last,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instr {
    pub label: Option<String>,
    pub op: Op,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HandlerDecl {
    pub name: String,
    pub regs: Vec<(String, i64)>,
    pub init: MsgId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MsgDecl {
    pub name: String,
    pub handler: usize,
    pub body: Vec<Instr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub vars: Vec<(String, i64)>,
    pub handlers: Vec<HandlerDecl>,
    pub msgs: Vec<MsgDecl>,
}

impl Program {
    pub fn handler_id(&self, name: &str) -> Option<usize> {
        self.handlers.iter().position(|h| h.name == name)
    }

    pub fn msg_id(&self, name: &str) -> Option<MsgId> {
        self.msgs.iter().position(|m| m.name == name)
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.0 == name)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ProgramError {
    pub line: usize,
    pub msg: String,
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, ProgramError> {
    Err(ProgramError { line, msg: msg.into() })
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn decl(line: usize, tok: &str) -> Result<(String, i64), ProgramError> {
    let (name, val) = match tok.split_once('=') {
        Some((n, v)) => match v.parse() {
            Ok(v) => (n, v),
            Err(_) => return err(line, format!("bad initial value in '{tok}'")),
        },
        None => (tok, 0),
    };
    if !is_ident(name) {
        return err(line, format!("bad name '{name}'"));
    }
    Ok((name.to_string(), val))
}

// -- expressions -------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(i64),
    Id(String),
    Op(BinOp),
    LParen,
    RParen,
}

fn lex(line: usize, s: &str) -> Result<Vec<Tok>, ProgramError> {
    let mut out = Vec::new();
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < b.len() && (b[i] as char).is_ascii_digit() {
                i += 1;
            }
            match s[start..i].parse() {
                Ok(n) => out.push(Tok::Num(n)),
                Err(_) => return err(line, format!("integer out of range: {}", &s[start..i])),
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Id(s[start..i].to_string()));
        } else {
            let two = s.get(i..i + 2).unwrap_or("");
            let (tok, len) = match (c, two) {
                (_, "==") => (Tok::Op(BinOp::Eq), 2),
                (_, "!=") => (Tok::Op(BinOp::Ne), 2),
                (_, "<=") => (Tok::Op(BinOp::Le), 2),
                ('<', _) => (Tok::Op(BinOp::Lt), 1),
                ('+', _) => (Tok::Op(BinOp::Add), 1),
                ('-', _) => (Tok::Op(BinOp::Sub), 1),
                ('*', _) => (Tok::Op(BinOp::Mul), 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                _ => return err(line, format!("unexpected character '{c}'")),
            };
            out.push(tok);
            i += len;
        }
    }
    Ok(out)
}

struct ExprParser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    line: usize,
    regs: &'a HashMap<String, RegId>,
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn cmp(&mut self) -> Result<Expr, ProgramError> {
        let lhs = self.sum()?;
        if let Some(Tok::Op(op @ (BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.sum()?;
            return Ok(Expr::Bin(Box::new(lhs), op, Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn sum(&mut self) -> Result<Expr, ProgramError> {
        let mut lhs = self.product()?;
        while let Some(Tok::Op(op @ (BinOp::Add | BinOp::Sub))) = self.peek().cloned() {
            self.pos += 1;
            lhs = Expr::Bin(Box::new(lhs), op, Box::new(self.product()?));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ProgramError> {
        let mut lhs = self.atom()?;
        while let Some(Tok::Op(BinOp::Mul)) = self.peek() {
            self.pos += 1;
            lhs = Expr::Bin(Box::new(lhs), BinOp::Mul, Box::new(self.atom()?));
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Expr, ProgramError> {
        let tok = self.peek().cloned();
        self.pos += 1;
        match tok {
            Some(Tok::Num(n)) => Ok(Expr::Const(n)),
            Some(Tok::Op(BinOp::Sub)) => match self.atom()? {
                Expr::Const(n) => Ok(Expr::Const(-n)),
                e => Ok(Expr::Bin(Box::new(Expr::Const(0)), BinOp::Sub, Box::new(e))),
            },
            Some(Tok::Id(name)) => match self.regs.get(&name) {
                Some(&r) => Ok(Expr::Reg(r)),
                None => err(self.line, format!("unknown register '{name}'")),
            },
            Some(Tok::LParen) => {
                let e = self.cmp()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => err(self.line, "expected ')'"),
                }
            }
            _ => err(self.line, "expected an expression"),
        }
    }
}

fn parse_expr(line: usize, s: &str, regs: &HashMap<String, RegId>) -> Result<Expr, ProgramError> {
    let toks = lex(line, s)?;
    let mut p = ExprParser { toks, pos: 0, line, regs };
    let e = p.cmp()?;
    if p.pos != p.toks.len() {
        return err(line, format!("trailing input in expression '{s}'"));
    }
    Ok(e)
}

// -- program -----------------------------------------------------------------

struct RawHandler {
    line: usize,
    name: String,
    regs: Vec<(String, i64)>,
    init: String,
}

struct RawMsg {
    line: usize,
    name: String,
    handler: String,
    body: Vec<(usize, Option<String>, String)>,
}

pub fn parse_program(src: &str) -> Result<Program, ProgramError> {
    let mut vars: Vec<(String, i64)> = Vec::new();
    let mut handlers: Vec<RawHandler> = Vec::new();
    let mut msgs: Vec<RawMsg> = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let text = raw.split('#').next().unwrap().trim();
        if text.is_empty() {
            continue;
        }
        let words: Vec<&str> = text.split_whitespace().collect();
        match words[0] {
            "vars" => {
                for w in &words[1..] {
                    vars.push(decl(line, w)?);
                }
            }
            "handler" => {
                let (name, rest) = match words.get(1) {
                    Some(n) if is_ident(n) => (n.to_string(), &words[2..]),
                    _ => return err(line, "expected 'handler NAME [regs ...] init MSG'"),
                };
                let mut regs = Vec::new();
                let mut init = None;
                let mut k = 0;
                while k < rest.len() {
                    match rest[k] {
                        "regs" => {
                            k += 1;
                            while k < rest.len() && rest[k] != "init" {
                                regs.push(decl(line, rest[k])?);
                                k += 1;
                            }
                        }
                        "init" if k + 1 < rest.len() => {
                            init = Some(rest[k + 1].to_string());
                            k += 2;
                        }
                        w => return err(line, format!("unexpected '{w}' in handler declaration")),
                    }
                }
                let Some(init) = init else { return err(line, format!("handler {name} has no init message")) };
                handlers.push(RawHandler { line, name, regs, init });
            }
            "msg" => match &words[..] {
                ["msg", name, "on", h] if h.ends_with(':') && is_ident(name) => msgs.push(RawMsg {
                    line,
                    name: name.to_string(),
                    handler: h.trim_end_matches(':').to_string(),
                    body: Vec::new(),
                }),
                _ => return err(line, "expected 'msg NAME on HANDLER:'"),
            },
            _ => {
                let Some(m) = msgs.last_mut() else { return err(line, "instruction outside a message") };
                let (label, stmt) = match text.split_once(':') {
                    Some((l, s)) if is_ident(l.trim()) => (Some(l.trim().to_string()), s.trim()),
                    _ => (None, text),
                };
                m.body.push((line, label, stmt.to_string()));
            }
        }
    }

    let mut var_ix: HashMap<String, VarId> = HashMap::new();
    for (i, (v, _)) in vars.iter().enumerate() {
        if var_ix.insert(v.clone(), i).is_some() {
            return err(0, format!("variable '{v}' declared twice"));
        }
    }
    let mut h_ix: HashMap<String, usize> = HashMap::new();
    for (i, h) in handlers.iter().enumerate() {
        if h.name == INIT_HANDLER {
            return err(h.line, format!("handler name '{INIT_HANDLER}' is reserved"));
        }
        if h_ix.insert(h.name.clone(), i).is_some() {
            return err(h.line, format!("handler '{}' declared twice", h.name));
        }
    }
    let mut m_ix: HashMap<String, MsgId> = HashMap::new();
    for (i, m) in msgs.iter().enumerate() {
        if m_ix.insert(m.name.clone(), i).is_some() {
            return err(m.line, format!("message '{}' declared twice", m.name));
        }
        if !h_ix.contains_key(&m.handler) {
            return err(m.line, format!("unknown handler '{}'", m.handler));
        }
    }

    let mut out_handlers = Vec::new();
    for h in &handlers {
        let Some(&init) = m_ix.get(&h.init) else {
            return err(h.line, format!("unknown init message '{}'", h.init));
        };
        if msgs[init].handler != h.name {
            return err(h.line, format!("init message '{}' belongs to another handler", h.init));
        }
        if out_handlers.iter().any(|o: &HandlerDecl| o.init == init) {
            return err(h.line, format!("message '{}' is the init message twice", h.init));
        }
        out_handlers.push(HandlerDecl { name: h.name.clone(), regs: h.regs.clone(), init });
    }

    let mut out_msgs = Vec::new();
    for m in &msgs {
        let hid = h_ix[&m.handler];
        let mut reg_ix: HashMap<String, RegId> = HashMap::new();
        for (i, (r, _)) in handlers[hid].regs.iter().enumerate() {
            if var_ix.contains_key(r) {
                return err(handlers[hid].line, format!("register '{r}' shadows a shared variable"));
            }
            if reg_ix.insert(r.clone(), i).is_some() {
                return err(handlers[hid].line, format!("register '{r}' declared twice"));
            }
        }
        let mut labels: HashMap<&str, usize> = HashMap::new();
        for (pc, (line, label, _)) in m.body.iter().enumerate() {
            if let Some(l) = label {
                if labels.insert(l, pc).is_some() {
                    return err(*line, format!("label '{l}' used twice"));
                }
            }
        }
        let target = |line: usize, l: &str| {
            labels.get(l).copied().ok_or_else(|| ProgramError { line, msg: format!("unknown label '{l}'") })
        };
        let mut body = Vec::new();
        for (line, label, stmt) in &m.body {
            let line = *line;
            let words: Vec<&str> = stmt.split_whitespace().collect();
            let op = match &words[..] {
                ["last"] => Op::Last,
                ["goto", l] => Op::Goto { target: target(line, l)? },
                ["post", h, msg] => {
                    let Some(&hid2) = h_ix.get(*h) else { return err(line, format!("unknown handler '{h}'")) };
                    let Some(&mid) = m_ix.get(*msg) else { return err(line, format!("unknown message '{msg}'")) };
                    if msgs[mid].handler != *h {
                        return err(line, format!("message '{msg}' does not belong to handler '{h}'"));
                    }
                    if out_handlers[hid2].init == mid {
                        return err(line, format!("init message '{msg}' cannot be posted"));
                    }
                    Op::Post { handler: hid2, msg: mid }
                }
                ["if", ..] => {
                    let rest = stmt[2..].trim();
                    let Some((cond, l)) = rest.rsplit_once("goto") else { return err(line, "expected 'if COND goto LABEL'") };
                    Op::IfGoto { cond: parse_expr(line, cond, &reg_ix)?, target: target(line, l.trim())? }
                }
                _ => {
                    let Some((lhs, rhs)) = stmt.split_once('=') else { return err(line, format!("cannot parse '{stmt}'")) };
                    let (lhs, rhs) = (lhs.trim(), rhs.trim());
                    if let Some(&v) = var_ix.get(lhs) {
                        match reg_ix.get(rhs) {
                            Some(&r) => Op::Write { var: v, reg: r },
                            None => return err(line, format!("a shared write needs a register, got '{rhs}'")),
                        }
                    } else if let Some(&r) = reg_ix.get(lhs) {
                        match var_ix.get(rhs) {
                            Some(&v) => Op::Read { reg: r, var: v },
                            None => Op::Assign { reg: r, exp: parse_expr(line, rhs, &reg_ix)? },
                        }
                    } else {
                        return err(line, format!("unknown variable or register '{lhs}'"));
                    }
                }
            };
            body.push(Instr { label: label.clone(), op });
        }
        if body.last().map(|i| &i.op) != Some(&Op::Last) {
            return err(m.line, format!("message '{}' must end with 'last'", m.name));
        }
        out_msgs.push(MsgDecl { name: m.name.clone(), handler: hid, body });
    }
    Ok(Program { vars, handlers: out_handlers, msgs: out_msgs })
}

struct ExprDisplay<'a>(&'a Expr, &'a [(String, i64)]);

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Reg(r) => f.write_str(&self.1[*r].0),
            Expr::Bin(a, op, b) => {
                write!(f, "({} {} {})", ExprDisplay(a, self.1), op.symbol(), ExprDisplay(b, self.1))
            }
        }
    }
}

/// Renders a program back to `.edp` text.
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let decls = |v: &[(String, i64)]| {
            v.iter().map(|(n, x)| if *x == 0 { n.clone() } else { format!("{n}={x}") }).collect::<Vec<_>>().join(" ")
        };
        if !self.vars.is_empty() {
            writeln!(f, "vars {}", decls(&self.vars))?;
        }
        for h in &self.handlers {
            let regs = if h.regs.is_empty() { String::new() } else { format!(" regs {}", decls(&h.regs)) };
            writeln!(f, "handler {}{regs} init {}", h.name, self.msgs[h.init].name)?;
        }
        for m in &self.msgs {
            let regs = &self.handlers[m.handler].regs;
            writeln!(f, "msg {} on {}:", m.name, self.handlers[m.handler].name)?;
            let label = |pc: usize| m.body[pc].label.clone().unwrap_or_else(|| format!("L{pc}"));
            for ins in &m.body {
                write!(f, "  ")?;
                if let Some(l) = &ins.label {
                    write!(f, "{l}: ")?;
                }
                match &ins.op {
                    Op::Write { var, reg } => writeln!(f, "{} = {}", self.vars[*var].0, regs[*reg].0)?,
                    Op::Read { reg, var } => writeln!(f, "{} = {}", regs[*reg].0, self.vars[*var].0)?,
                    Op::Assign { reg, exp } => writeln!(f, "{} = {}", regs[*reg].0, ExprDisplay(exp, regs))?,
                    Op::IfGoto { cond, target } => {
                        writeln!(f, "if {} goto {}", ExprDisplay(cond, regs), label(*target))?
                    }
                    Op::Goto { target } => writeln!(f, "goto {}", label(*target))?,
                    Op::Post { handler, msg } => {
                        writeln!(f, "post {} {}", self.handlers[*handler].name, self.msgs[*msg].name)?
                    }
                    Op::Last => writeln!(f, "last")?,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "\
# two handlers
vars x y=2
handler h regs a b=1 init start
handler g regs c init idle
msg start on h:
  a = x
  L: a = a + b * 2
  if a < 3 goto L
  x = a
  post g work
  last
msg idle on g:
  last
msg work on g:
  c = y
  c = -c
  y = c
  last
";

    #[test]
    fn parses_all_forms() {
        let p = parse_program(SRC).unwrap();
        assert_eq!(p.vars, vec![("x".into(), 0), ("y".into(), 2)]);
        assert_eq!(p.handlers[0].regs, vec![("a".into(), 0), ("b".into(), 1)]);
        let body = &p.msgs[0].body;
        assert_eq!(body[0].op, Op::Read { reg: 0, var: 0 });
        assert_eq!(body[1].label.as_deref(), Some("L"));
        assert_eq!(body[2].op, Op::IfGoto {
            cond: Expr::Bin(Box::new(Expr::Reg(0)), BinOp::Lt, Box::new(Expr::Const(3))),
            target: 1
        });
        assert_eq!(body[3].op, Op::Write { var: 0, reg: 0 });
        assert_eq!(body[4].op, Op::Post { handler: 1, msg: 2 });
        let Op::Assign { exp, .. } = &body[1].op else { panic!() };
        assert_eq!(exp.eval(&[1, 3]), 7);
    }

    #[test]
    fn display_round_trips() {
        let p = parse_program(SRC).unwrap();
        assert_eq!(parse_program(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn load_errors() {
        let bad = [
            ("vars x\nhandler h init m\nmsg m on h:\n  x = 1\n  last\n", "needs a register"),
            ("handler h init m\nmsg m on h:\n  goto Z\n  last\n", "unknown label"),
            ("handler h init m\nmsg m on h:\n  last\nmsg n on h:\n  L: goto L\n", "must end with 'last'"),
            ("handler h init m\nmsg m on h:\n  post h m\n  last\n", "cannot be posted"),
            ("handler __init init m\nmsg m on __init:\n  last\n", "reserved"),
            ("handler h init m\nhandler g init n\nmsg m on h:\n  post g m\n  last\nmsg n on g:\n  last\n", "does not belong"),
            ("vars x\nhandler h regs x init m\nmsg m on h:\n  last\n", "shadows"),
            ("handler h regs a init m\nmsg m on h:\n  a = q + 1\n  last\n", "unknown register"),
        ];
        for (src, want) in bad {
            let e = parse_program(src).unwrap_err().to_string();
            assert!(e.contains(want), "{src:?}: {e}");
        }
    }
}
