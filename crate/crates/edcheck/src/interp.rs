//! Small-step interpreter and trace extraction.
//!
//! A handler runs its current message to `last`, then takes the head of its
//! mailbox. Message instances are identified by `(poster, counter)`; every
//! handler starts in its initial message with id `(h, 0)`.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::program::{MsgId, Op, Program, VarId, INIT_HANDLER};
use crate::trace::{EventKind, Rel, TraceGraph};

/// Message instance id: (posting handler, counter).
pub type Mid = (usize, u64);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HandlerState {
    pub regs: Vec<i64>,
    pub mailbox: VecDeque<(MsgId, Mid)>,
    /// Current message and instruction index.
    pub line: (MsgId, usize),
    pub mid: Mid,
    pub mcount: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub vars: Vec<i64>,
    pub handlers: Vec<HandlerState>,
}

impl Configuration {
    pub fn initial(p: &Program) -> Configuration {
        Configuration {
            vars: p.vars.iter().map(|v| v.1).collect(),
            handlers: p
                .handlers
                .iter()
                .enumerate()
                .map(|(h, d)| HandlerState {
                    regs: d.regs.iter().map(|r| r.1).collect(),
                    mailbox: VecDeque::new(),
                    line: (d.init, 0),
                    mid: (h, 0),
                    mcount: 1,
                })
                .collect(),
        }
    }

    pub fn enabled(&self, p: &Program, h: usize) -> bool {
        let s = &self.handlers[h];
        let (m, pc) = s.line;
        p.msgs[m].body[pc].op != Op::Last || !s.mailbox.is_empty()
    }

    pub fn enabled_handlers(&self, p: &Program) -> Vec<usize> {
        (0..self.handlers.len()).filter(|&h| self.enabled(p, h)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RunEventKind {
    Write { var: VarId, val: i64 },
    Read { var: VarId, val: i64 },
    Post { receiver: usize, msg: MsgId, newmid: Mid },
    Get { msg: MsgId },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RunEvent {
    pub handler: usize,
    pub kind: RunEventKind,
    /// Message instance the event belongs to (for a get: the one it starts).
    pub mid: Mid,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RunError {
    #[error("handler {0} is not enabled")]
    NotEnabled(String),
    #[error("no handler {0}")]
    NoHandler(usize),
}

/// Applies one transition of handler `h`.
pub fn step(p: &Program, c: &Configuration, h: usize) -> Result<(Configuration, Option<RunEvent>), RunError> {
    if h >= c.handlers.len() {
        return Err(RunError::NoHandler(h));
    }
    if !c.enabled(p, h) {
        return Err(RunError::NotEnabled(p.handlers[h].name.clone()));
    }
    let mut d = c.clone();
    let s = &mut d.handlers[h];
    let (m, pc) = s.line;
    let mut ev = None;
    match &p.msgs[m].body[pc].op {
        Op::Write { var, reg } => {
            let val = s.regs[*reg];
            d.vars[*var] = val;
            ev = Some(RunEventKind::Write { var: *var, val });
            s.line.1 += 1;
        }
        Op::Read { reg, var } => {
            let val = d.vars[*var];
            s.regs[*reg] = val;
            ev = Some(RunEventKind::Read { var: *var, val });
            s.line.1 += 1;
        }
        Op::Assign { reg, exp } => {
            s.regs[*reg] = exp.eval(&s.regs);
            s.line.1 += 1;
        }
        Op::IfGoto { cond, target } => {
            s.line.1 = if cond.eval(&s.regs) != 0 { *target } else { pc + 1 };
        }
        Op::Goto { target } => s.line.1 = *target,
        Op::Post { handler, msg } => {
            let newmid = (h, s.mcount);
            s.mcount += 1;
            s.line.1 += 1;
            d.handlers[*handler].mailbox.push_back((*msg, newmid));
            ev = Some(RunEventKind::Post { receiver: *handler, msg: *msg, newmid });
        }
        Op::Last => {
            let (msg, mid) = s.mailbox.pop_front().expect("enabled");
            s.mid = mid;
            s.line = (msg, 0);
            ev = Some(RunEventKind::Get { msg });
        }
    }
    let mid = d.handlers[h].mid;
    Ok((d, ev.map(|kind| RunEvent { handler: h, kind, mid })))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Schedule {
    Seeded(u64),
    /// Depth-first over event-level choices, up to this many events.
    Exhaustive(usize),
    /// One handler per transition.
    Replay(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub events: Vec<RunEvent>,
    /// Handler chosen at each transition.
    pub decisions: Vec<usize>,
    pub last: Configuration,
    /// Stopped by the step bound rather than by quiescence.
    pub truncated: bool,
}

/// Runs under a seeded or replayed schedule; an exhaustive schedule returns
/// the first run of [`run_exhaustive`].
pub fn run(p: &Program, s: &Schedule, max_steps: usize) -> Result<Run, RunError> {
    let mut c = Configuration::initial(p);
    let mut events = Vec::new();
    let mut decisions = Vec::new();
    match s {
        Schedule::Exhaustive(depth) => {
            return Ok(run_exhaustive(p, *depth, max_steps).into_iter().next().expect("at least one run"))
        }
        Schedule::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            while decisions.len() < max_steps {
                let en = c.enabled_handlers(p);
                if en.is_empty() {
                    break;
                }
                let h = en[rng.random_range(0..en.len())];
                let (d, e) = step(p, &c, h)?;
                c = d;
                decisions.push(h);
                events.extend(e);
            }
        }
        Schedule::Replay(ds) => {
            for &h in ds.iter().take(max_steps) {
                let (d, e) = step(p, &c, h)?;
                c = d;
                decisions.push(h);
                events.extend(e);
            }
        }
    }
    let truncated = !c.enabled_handlers(p).is_empty();
    Ok(Run { events, decisions, last: c, truncated })
}

/// Runs handler `h` through local transitions up to its next event.
fn advance(
    p: &Program,
    c: &Configuration,
    h: usize,
    budget: usize,
) -> Option<(Configuration, RunEvent, Vec<usize>)> {
    let mut c = c.clone();
    let mut steps = Vec::new();
    while steps.len() < budget {
        let (d, e) = step(p, &c, h).ok()?;
        c = d;
        steps.push(h);
        if let Some(e) = e {
            return Some((c, e, steps));
        }
    }
    None
}

/// All runs reachable by choosing which handler produces the next event, up
/// to `depth` events and `max_steps` transitions. Configurations already
/// explored are not expanded again, so every reachable configuration is
/// covered once and the returned runs have pairwise distinct event
/// sequences.
pub fn run_exhaustive(p: &Program, depth: usize, max_steps: usize) -> Vec<Run> {
    let mut out = Vec::new();
    let mut seen: HashSet<Configuration> = HashSet::new();
    let start = Configuration::initial(p);
    seen.insert(start.clone());
    let mut stack = vec![(start, Vec::<RunEvent>::new(), Vec::<usize>::new())];
    while let Some((c, events, decisions)) = stack.pop() {
        let mut children = Vec::new();
        if events.len() < depth {
            for h in c.enabled_handlers(p) {
                let budget = max_steps.saturating_sub(decisions.len());
                if let Some((d, e, steps)) = advance(p, &c, h, budget) {
                    children.push((d, e, steps));
                }
            }
        }
        if children.is_empty() {
            let truncated = !c.enabled_handlers(p).is_empty();
            out.push(Run { events, decisions, last: c, truncated });
            continue;
        }
        // Reverse so the lowest handler is explored first.
        for (d, e, steps) in children.into_iter().rev() {
            if seen.insert(d.clone()) {
                let mut ev = events.clone();
                ev.push(e);
                let mut ds = decisions.clone();
                ds.extend(steps);
                stack.push((d, ev, ds));
            }
        }
    }
    out
}

/// The trace induced by a run, with `mo` and `eo`.
///
/// Variables read before any write get their initial value from a write in
/// the initial message of the synthetic handler `__init`. Program order is
/// emitted as successor edges per message plus "last initial event before
/// every get"; `co`, `mo` and `eo` as successor chains.
pub fn extract_trace(p: &Program, r: &Run) -> TraceGraph {
    let mut t = TraceGraph::new();
    for h in &p.handlers {
        t.add_handler(&h.name).expect("distinct handler names");
    }
    let mut written: HashSet<VarId> = HashSet::new();
    let mut needs_init: Vec<VarId> = Vec::new();
    for e in &r.events {
        match e.kind {
            RunEventKind::Write { var, .. } => {
                written.insert(var);
            }
            RunEventKind::Read { var, .. }
                if !written.contains(&var) && !needs_init.contains(&var) => {
                    needs_init.push(var);
                }
            _ => {}
        }
    }
    needs_init.sort_unstable();
    let mut last_write: HashMap<VarId, usize> = HashMap::new();
    let mut writes: BTreeMap<VarId, Vec<usize>> = BTreeMap::new();
    if !needs_init.is_empty() {
        let ih = t.add_handler(INIT_HANDLER).expect("reserved name is free");
        let mut prev = None;
        for &v in &needs_init {
            let (name, val) = &p.vars[v];
            let id = t
                .add_event(&format!("init_{name}"), ih, EventKind::Write { var: name.clone(), val: *val })
                .expect("fresh id");
            if let Some(q) = prev {
                t.add_edge(Rel::Po, q, id);
            }
            prev = Some(id);
            last_write.insert(v, id);
            writes.entry(v).or_default().push(id);
        }
    }

    let mut by_mid: HashMap<Mid, usize> = HashMap::new();
    let mut post_of: HashMap<Mid, usize> = HashMap::new();
    let mut initial_last: Vec<Option<usize>> = vec![None; p.handlers.len()];
    let mut gets: Vec<Vec<usize>> = vec![Vec::new(); p.handlers.len()];
    let mut posts_to: Vec<Vec<usize>> = vec![Vec::new(); p.handlers.len()];
    for (i, e) in r.events.iter().enumerate() {
        let name = format!("e{}", i + 1);
        let kind = match &e.kind {
            RunEventKind::Write { var, val } => EventKind::Write { var: p.vars[*var].0.clone(), val: *val },
            RunEventKind::Read { var, .. } => EventKind::Read { var: p.vars[*var].0.clone() },
            RunEventKind::Post { receiver, .. } => EventKind::Post { receiver: *receiver },
            RunEventKind::Get { .. } => EventKind::Get,
        };
        let id = t.add_event(&name, e.handler, kind).expect("fresh id");
        if let Some(&prev) = by_mid.get(&e.mid) {
            t.add_edge(Rel::Po, prev, id);
        }
        by_mid.insert(e.mid, id);
        if e.mid == (e.handler, 0) {
            initial_last[e.handler] = Some(id);
        }
        match &e.kind {
            RunEventKind::Write { var, .. } => {
                last_write.insert(*var, id);
                writes.entry(*var).or_default().push(id);
            }
            RunEventKind::Read { var, .. } => {
                t.add_edge(Rel::Rf, last_write[var], id);
            }
            RunEventKind::Post { receiver, newmid, .. } => {
                post_of.insert(*newmid, id);
                posts_to[*receiver].push(id);
            }
            RunEventKind::Get { .. } => {
                t.add_edge(Rel::Pb, post_of[&e.mid], id);
                gets[e.handler].push(id);
            }
        }
    }
    for h in 0..p.handlers.len() {
        if let Some(l) = initial_last[h] {
            for &g in &gets[h] {
                t.add_edge(Rel::Po, l, g);
            }
        }
        for w in posts_to[h].windows(2) {
            t.add_edge(Rel::Mo, w[0], w[1]);
        }
        for w in gets[h].windows(2) {
            t.add_edge(Rel::Eo, w[0], w[1]);
        }
    }
    for ws in writes.values() {
        for w in ws.windows(2) {
            t.add_edge(Rel::Co, w[0], w[1]);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse_program;
    use crate::trace::{hb_acyclic, validate, ValidateOptions};

    fn prog(src: &str) -> Program {
        parse_program(src).unwrap()
    }

    #[test]
    fn write_rule() {
        let p = prog("vars x\nhandler h regs a=5 init m\nmsg m on h:\n  x = a\n  last\n");
        let c = Configuration::initial(&p);
        let (d, e) = step(&p, &c, 0).unwrap();
        assert_eq!(d.vars, vec![5]);
        assert_eq!(e.unwrap().kind, RunEventKind::Write { var: 0, val: 5 });
    }

    #[test]
    fn get_takes_the_head() {
        let p = prog("handler h init i\nmsg i on h:\n  last\nmsg m1 on h:\n  last\nmsg m2 on h:\n  last\n");
        let mut c = Configuration::initial(&p);
        c.handlers[0].mailbox.extend([(1, (0, 1)), (2, (0, 2))]);
        let (d, e) = step(&p, &c, 0).unwrap();
        assert_eq!(d.handlers[0].line, (1, 0));
        assert_eq!(d.handlers[0].mailbox.len(), 1);
        assert_eq!(e.unwrap(), RunEvent { handler: 0, kind: RunEventKind::Get { msg: 1 }, mid: (0, 1) });
    }

    #[test]
    fn post_rule() {
        let p = prog("handler h init i\nhandler g init j\nmsg i on h:\n  post g m\n  last\nmsg j on g:\n  last\nmsg m on g:\n  last\n");
        let mut c = Configuration::initial(&p);
        c.handlers[0].mcount = 3;
        let (d, e) = step(&p, &c, 0).unwrap();
        assert_eq!(d.handlers[1].mailbox, VecDeque::from([(2, (0, 3))]));
        assert_eq!(d.handlers[0].mcount, 4);
        assert!(matches!(e.unwrap().kind, RunEventKind::Post { newmid: (0, 3), .. }));
    }

    #[test]
    fn idle_handlers_give_an_empty_run() {
        let p = prog("handler h init i\nhandler g init j\nmsg i on h:\n  last\nmsg j on g:\n  last\n");
        let r = run(&p, &Schedule::Seeded(1), 100).unwrap();
        assert!(r.events.is_empty() && !r.truncated);
        assert!(matches!(step(&p, &r.last, 0), Err(RunError::NotEnabled(_))));
    }

    #[test]
    fn single_write_run() {
        let p = prog("vars x\nhandler h regs a init m\nmsg m on h:\n  x = a\n  last\n");
        let r = run(&p, &Schedule::Seeded(7), 100).unwrap();
        assert_eq!(r.events.len(), 1);
        assert!(matches!(r.events[0].kind, RunEventKind::Write { val: 0, .. }));
    }

    #[test]
    fn replay_rejects_disabled_handlers() {
        let p = prog("handler h init i\nmsg i on h:\n  last\n");
        assert!(matches!(run(&p, &Schedule::Replay(vec![0]), 10), Err(RunError::NotEnabled(_))));
    }

    #[test]
    fn rf_takes_latest_write() {
        let p = prog("vars x\nhandler h1 regs a=1 init m\nhandler h2 regs b init n\nmsg m on h1:\n  x = a\n  last\nmsg n on h2:\n  b = x\n  last\n");
        let r = run(&p, &Schedule::Replay(vec![0, 1]), 10).unwrap();
        let t = extract_trace(&p, &r);
        let rf: Vec<_> = t.pairs(Rel::Rf).collect();
        assert_eq!(rf, vec![(0, 1)]);
        assert!(validate(&t, ValidateOptions::full()).is_ok());
    }

    #[test]
    fn mailbox_relations() {
        let p = prog("handler g init i\nhandler h init j\nmsg i on g:\n  post h m\n  post h m\n  last\nmsg j on h:\n  last\nmsg m on h:\n  last\n");
        let r = run(&p, &Schedule::Seeded(3), 100).unwrap();
        let t = extract_trace(&p, &r);
        let posts: Vec<_> = (0..t.num_events()).filter(|&e| t.event(e).kind.is_post()).collect();
        assert_eq!(t.pairs(Rel::Mo).collect::<Vec<_>>(), vec![(posts[0], posts[1])]);
        assert_eq!(t.pairs(Rel::Eo).count(), 1);
        assert_eq!(t.pairs(Rel::Pb).count(), 2);
        assert!(validate(&t, ValidateOptions::full()).is_ok());
        assert!(hb_acyclic(&t).is_acyclic());
    }

    #[test]
    fn reads_of_initial_values_use_the_init_handler() {
        let p = prog("vars x=4\nhandler h regs a init m\nmsg m on h:\n  a = x\n  last\n");
        let r = run(&p, &Schedule::Seeded(0), 10).unwrap();
        let t = extract_trace(&p, &r);
        assert_eq!(t.handlers().last().unwrap(), INIT_HANDLER);
        let w = t.event_id("init_x").unwrap();
        assert_eq!(t.event(w).kind, EventKind::Write { var: "x".into(), val: 4 });
        assert!(validate(&t, ValidateOptions::full()).is_ok());
    }
}
