//! Timestamp encoding in SMT-LIB (QF_IDL) and an out-of-process solver.
//!
//! Every event gets an integer timestamp. A total order extending the hard
//! edges and satisfying the disjunctions exists iff the trace is consistent;
//! the decoder sorts timestamps (ties by event index) into a linearization.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use thiserror::Error;
use wait_timeout::ChildExt;

use crate::analysis::Analysis;
use crate::trace::{derived_fr, EventId, TraceGraph, ValidationReport, Witness};
use crate::Outcome;

pub const SOLVER_ENV: &str = "EDCHECK_SOLVER_CMD";
pub const DEFAULT_SOLVER: &str = "z3 -in -smt2";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolverQuery {
    /// One symbol per event, by event index.
    pub vars: Vec<String>,
    pub hard_edges: BTreeSet<(EventId, EventId)>,
    /// `(a < b) ∨ (c < d)`: one message entirely before the other.
    pub serial_disjunctions: Vec<((EventId, EventId), (EventId, EventId))>,
    /// `(p1 < p2) ∨ (p2 < p1)`.
    pub post_disjunctions: Vec<(EventId, EventId)>,
    /// `(p1 < p2) ⇔ (g1 < g2)`.
    pub fifo_couplings: Vec<((EventId, EventId), (EventId, EventId))>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodeOptions {
    /// Queue discipline: FIFO couplings and consumed-before-pending posts.
    pub fifo: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions { fifo: true }
    }
}

fn is_simple(c: char) -> bool {
    c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c)
}

/// `t_<id>`, quoted when the id is not a simple symbol.
pub fn symbol(id: &str, index: usize) -> String {
    if id.chars().all(is_simple) {
        format!("t_{id}")
    } else if !id.contains(['|', '\\']) {
        format!("|t_{id}|")
    } else {
        format!("|#{index}|")
    }
}

pub fn encode(t: &TraceGraph) -> Result<SolverQuery, ValidationReport> {
    encode_with(t, EncodeOptions::default())
}

pub fn encode_with(t: &TraceGraph, opts: EncodeOptions) -> Result<SolverQuery, ValidationReport> {
    let an = Analysis::new(t)?;
    let vars = t.events().iter().enumerate().map(|(i, e)| symbol(&e.name, i)).collect();
    let mut hard: BTreeSet<(EventId, EventId)> = BTreeSet::new();
    let ms = &an.ms;
    // The static edges of the analysis minus its reduced fr and, without
    // FIFO, the pending-post edges; full fr is added explicitly.
    let pending: BTreeSet<(EventId, EventId)> = an
        .mailboxes
        .iter()
        .enumerate()
        .flat_map(|(h, mb)| {
            let an = &an;
            ms.posted[h]
                .iter()
                .flat_map(move |&m| mb.pending.iter().map(move |&q| (an.post(m), q)))
        })
        .collect();
    use crate::trace::Rel;
    for rel in [Rel::Po, Rel::Rf, Rel::Co, Rel::Pb] {
        hard.extend(t.pairs(rel));
    }
    for h in 0..t.num_handlers() {
        if let Some(last) = ms.messages[ms.initial[h]].last() {
            for &m in &ms.posted[h] {
                hard.insert((last, an.get(m)));
            }
        }
    }
    hard.extend(derived_fr(t));
    if opts.fifo {
        hard.extend(pending);
    }

    let mut serial = Vec::new();
    let mut post_disj = Vec::new();
    let mut fifo = Vec::new();
    for h in 0..t.num_handlers() {
        let mut msgs: Vec<usize> = Vec::new();
        if !ms.messages[ms.initial[h]].events.is_empty() {
            msgs.push(ms.initial[h]);
        }
        msgs.extend(&ms.posted[h]);
        for i in 0..msgs.len() {
            for j in i + 1..msgs.len() {
                let (a, b) = (&ms.messages[msgs[i]], &ms.messages[msgs[j]]);
                serial.push((
                    (a.last().unwrap(), b.first().unwrap()),
                    (b.last().unwrap(), a.first().unwrap()),
                ));
            }
        }
        let mut posts: Vec<(EventId, Option<EventId>)> =
            ms.posted[h].iter().map(|&m| (an.post(m), Some(an.get(m)))).collect();
        posts.extend(an.mailboxes[h].pending.iter().map(|&p| (p, None)));
        posts.sort();
        for i in 0..posts.len() {
            for j in i + 1..posts.len() {
                post_disj.push((posts[i].0, posts[j].0));
                if let (true, Some(g1), Some(g2)) = (opts.fifo, posts[i].1, posts[j].1) {
                    fifo.push(((posts[i].0, posts[j].0), (g1, g2)));
                }
            }
        }
    }
    Ok(SolverQuery {
        vars,
        hard_edges: hard,
        serial_disjunctions: serial,
        post_disjunctions: post_disj,
        fifo_couplings: fifo,
    })
}

pub fn render_smtlib(q: &SolverQuery) -> String {
    let v = |e: EventId| q.vars[e].as_str();
    let lt = |a: EventId, b: EventId| format!("(< {} {})", v(a), v(b));
    let mut asserts: Vec<String> = Vec::new();
    asserts.extend(q.hard_edges.iter().map(|&(a, b)| format!("(assert {})", lt(a, b))));
    for &((a, b), (c, d)) in &q.serial_disjunctions {
        asserts.push(format!("(assert (or {} {}))", lt(a, b), lt(c, d)));
    }
    for &(a, b) in &q.post_disjunctions {
        asserts.push(format!("(assert (or {} {}))", lt(a, b), lt(b, a)));
    }
    for &((p1, p2), (g1, g2)) in &q.fifo_couplings {
        asserts.push(format!("(assert (= {} {}))", lt(p1, p2), lt(g1, g2)));
    }
    asserts.sort();
    asserts.dedup();
    let mut out = String::from("(set-logic QF_IDL)\n");
    for name in &q.vars {
        out += &format!("(declare-const {name} Int)\n");
    }
    for a in asserts {
        out += &a;
        out.push('\n');
    }
    out += "(check-sat)\n";
    if !q.vars.is_empty() {
        out += &format!("(get-value ({}))\n", q.vars.join(" "));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverBackend {
    pub argv: Vec<String>,
}

impl SolverBackend {
    pub fn from_command(cmd: &str) -> Result<SolverBackend, String> {
        match shlex::split(cmd) {
            Some(argv) if !argv.is_empty() => Ok(SolverBackend { argv }),
            _ => Err(format!("cannot parse solver command '{cmd}'")),
        }
    }

    /// `$EDCHECK_SOLVER_CMD`, else `z3 -in -smt2`.
    pub fn from_env() -> SolverBackend {
        let cmd = std::env::var(SOLVER_ENV).unwrap_or_else(|_| DEFAULT_SOLVER.to_string());
        SolverBackend::from_command(&cmd)
            .unwrap_or_else(|_| SolverBackend::from_command(DEFAULT_SOLVER).unwrap())
    }
}

impl Default for SolverBackend {
    fn default() -> Self {
        SolverBackend::from_env()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolverAnswer {
    Sat(String),
    Unsat,
    Unknown,
    TimedOut,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("cannot start solver '{0}': {1}")]
    Spawn(String, String),
    #[error("solver i/o: {0}")]
    Io(String),
    #[error("solver exited with {status}: {output}")]
    Exit { status: String, output: String },
    #[error("unexpected solver output: {0}")]
    Output(String),
}

/// Runs the solver once on `doc`.
pub fn run_solver(
    backend: &SolverBackend,
    doc: &str,
    timeout: Option<Duration>,
) -> Result<SolverAnswer, BackendError> {
    let mut child = Command::new(&backend.argv[0])
        .args(&backend.argv[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| BackendError::Spawn(backend.argv.join(" "), e.to_string()))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let doc = doc.to_owned();
    let writer = std::thread::spawn(move || {
        let r = stdin.write_all(doc.as_bytes());
        drop(stdin);
        r
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        stdout.read_to_string(&mut s).map(|_| s)
    });
    let status = match timeout {
        Some(d) => match child.wait_timeout(d).map_err(|e| BackendError::Io(e.to_string()))? {
            Some(s) => s,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(SolverAnswer::TimedOut);
            }
        },
        None => child.wait().map_err(|e| BackendError::Io(e.to_string()))?,
    };
    // A solver that answers before reading everything closes the pipe; the
    // answer is what counts.
    let _ = writer.join();
    let out = reader
        .join()
        .map_err(|_| BackendError::Io("reader panicked".into()))?
        .map_err(|e| BackendError::Io(e.to_string()))?;
    let first = out.lines().next().unwrap_or("").trim();
    match first {
        "sat" => Ok(SolverAnswer::Sat(out)),
        "unsat" => Ok(SolverAnswer::Unsat),
        "unknown" | "timeout" => Ok(SolverAnswer::Unknown),
        _ if !status.success() => {
            let mut err = String::new();
            if let Some(mut e) = child.stderr.take() {
                let _ = e.read_to_string(&mut err);
            }
            Err(BackendError::Exit { status: status.to_string(), output: format!("{out}{err}").trim().to_string() })
        }
        _ => Err(BackendError::Output(out)),
    }
}

#[derive(Debug, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexps(s: &str) -> Result<Vec<Sexp>, String> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let done = stack.pop().filter(|_| !stack.is_empty()).ok_or("unbalanced ')'")?;
                stack.last_mut().unwrap().push(Sexp::List(done));
            }
            c if c.is_whitespace() => {}
            '|' => {
                let mut a = String::from("|");
                loop {
                    match chars.next() {
                        Some('|') => break,
                        Some(c) => a.push(c),
                        None => return Err("unterminated |symbol|".into()),
                    }
                }
                a.push('|');
                stack.last_mut().unwrap().push(Sexp::Atom(a));
            }
            c => {
                let mut a = String::from(c);
                while let Some(&d) = chars.peek() {
                    if d == '(' || d == ')' || d.is_whitespace() {
                        break;
                    }
                    a.push(d);
                    chars.next();
                }
                stack.last_mut().unwrap().push(Sexp::Atom(a));
            }
        }
    }
    match stack.len() {
        1 => Ok(stack.pop().unwrap()),
        _ => Err("unbalanced '('".into()),
    }
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('|').and_then(|s| s.strip_suffix('|')).unwrap_or(s)
}

fn int_value(e: &Sexp) -> Option<i64> {
    match e {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(l) => match &l[..] {
            [Sexp::Atom(m), x] if m == "-" => int_value(x).map(|v| -v),
            _ => None,
        },
    }
}

/// Reads `((sym value) ...)` pairs after the `sat` line.
pub fn parse_model(q: &SolverQuery, out: &str) -> Result<Vec<i64>, String> {
    let body = out.trim_start().strip_prefix("sat").ok_or("missing 'sat'")?;
    let index: HashMap<&str, usize> = q.vars.iter().enumerate().map(|(i, v)| (unquote(v), i)).collect();
    let mut vals: Vec<Option<i64>> = vec![None; q.vars.len()];
    for top in parse_sexps(body)? {
        let Sexp::List(pairs) = top else { return Err("model is not a list".into()) };
        for p in pairs {
            match p {
                Sexp::List(kv) if kv.len() == 2 => {
                    let Sexp::Atom(k) = &kv[0] else { return Err("bad model key".into()) };
                    let i = *index.get(unquote(k)).ok_or_else(|| format!("unknown symbol {k}"))?;
                    vals[i] = Some(int_value(&kv[1]).ok_or_else(|| format!("bad value for {k}"))?);
                }
                _ => return Err("bad model entry".into()),
            }
        }
    }
    vals.into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| format!("no value for {}", q.vars[i])))
        .collect()
}

#[derive(Clone, Debug)]
pub struct SmtConfig {
    pub backend: SolverBackend,
    pub timeout: Option<Duration>,
    pub fifo: bool,
}

impl Default for SmtConfig {
    fn default() -> Self {
        SmtConfig { backend: SolverBackend::from_env(), timeout: Some(crate::DEFAULT_TIMEOUT), fifo: true }
    }
}

pub fn check_smt(t: &TraceGraph, cfg: &SmtConfig) -> Result<Outcome, ValidationReport> {
    let q = encode_with(t, EncodeOptions { fifo: cfg.fifo })?;
    let doc = render_smtlib(&q);
    let out = match run_solver(&cfg.backend, &doc, cfg.timeout) {
        Ok(SolverAnswer::Unsat) => Outcome::Inconsistent,
        Ok(SolverAnswer::Unknown | SolverAnswer::TimedOut) => Outcome::Timeout,
        Ok(SolverAnswer::Sat(model)) => {
            let vals = if q.vars.is_empty() { Ok(vec![]) } else { parse_model(&q, &model) };
            match vals {
                Err(e) => Outcome::BackendError(format!("unparsable model: {e}")),
                Ok(vals) => {
                    let mut lin: Vec<EventId> = (0..vals.len()).collect();
                    lin.sort_by_key(|&e| (vals[e], e));
                    let w = Witness::from_linearization(t, lin);
                    match (cfg.fifo, w.check(t)) {
                        (true, Err(e)) => Outcome::BackendError(format!("decoded witness invalid: {e}")),
                        _ => Outcome::Consistent(w),
                    }
                }
            }
        }
        Err(e) => Outcome::BackendError(e.to_string()),
    };
    Ok(out)
}
