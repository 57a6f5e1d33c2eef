//! Random small traces for differential testing.
//!
//! A random execution is simulated directly (no program): handlers pick
//! writes, reads of already-written variables and posts, finish messages and
//! take the head of their mailbox. The induced trace is consistent; dropping
//! `mo`/`eo` gives a partial trace with a known-consistent answer, and
//! [`mutate`] rewires `rf` or permutes `co` to produce traces of either
//! verdict.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::trace::{EventId, EventKind, Rel, TraceGraph};

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub max_events: usize,
    pub min_handlers: usize,
    pub max_handlers: usize,
    pub vars: usize,
    /// Allow posts outside initial messages.
    pub nested: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_events: 10, min_handlers: 2, max_handlers: 4, vars: 2, nested: true }
    }
}

struct Sim {
    t: TraceGraph,
    /// Per handler: last event of the running message, whether it is the
    /// initial one, and the mailbox of posts.
    last: Vec<Option<EventId>>,
    in_initial: Vec<bool>,
    running: Vec<bool>,
    initial_last: Vec<Option<EventId>>,
    queue: Vec<VecDeque<EventId>>,
    last_write: Vec<Option<EventId>>,
    writes: Vec<Vec<EventId>>,
}

impl Sim {
    fn emit(&mut self, h: usize, kind: EventKind) -> EventId {
        let name = format!("e{}", self.t.num_events() + 1);
        let e = self.t.add_event(&name, h, kind).expect("fresh id");
        if let Some(p) = self.last[h] {
            self.t.add_edge(Rel::Po, p, e);
        }
        self.last[h] = Some(e);
        if self.in_initial[h] {
            self.initial_last[h] = Some(e);
        }
        e
    }
}

/// A consistent full trace (with `mo` and `eo`).
pub fn random_full_trace<R: Rng>(rng: &mut R, cfg: &GenConfig) -> TraceGraph {
    let k = rng.random_range(cfg.min_handlers..=cfg.max_handlers);
    let mut t = TraceGraph::new();
    for h in 0..k {
        t.add_handler(&format!("h{h}")).expect("distinct");
    }
    let mut s = Sim {
        t,
        last: vec![None; k],
        in_initial: vec![true; k],
        running: vec![true; k],
        initial_last: vec![None; k],
        queue: vec![VecDeque::new(); k],
        last_write: vec![None; cfg.vars],
        writes: vec![Vec::new(); cfg.vars],
    };
    let n = rng.random_range(1..=cfg.max_events);
    let mut gets: Vec<Vec<EventId>> = vec![Vec::new(); k];
    let mut posts_to: Vec<Vec<EventId>> = vec![Vec::new(); k];
    let mut stuck = 0;
    while s.t.num_events() < n && stuck < 100 {
        let h = rng.random_range(0..k);
        if !s.running[h] || rng.random_bool(0.25) {
            // Finish the message, if any, and take the next one.
            if let Some(p) = s.queue[h].pop_front() {
                s.in_initial[h] = false;
                s.running[h] = true;
                s.last[h] = None;
                let g = s.emit(h, EventKind::Get);
                s.t.add_edge(Rel::Pb, p, g);
                gets[h].push(g);
            } else {
                s.running[h] = false;
                stuck += 1;
            }
            continue;
        }
        let can_post = cfg.nested || s.in_initial[h];
        match rng.random_range(0..3) {
            0 => {
                let v = rng.random_range(0..cfg.vars);
                let e = s.emit(h, EventKind::Write { var: format!("x{v}"), val: s.t.num_events() as i64 + 1 });
                s.last_write[v] = Some(e);
                s.writes[v].push(e);
            }
            1 => {
                let written: Vec<usize> = (0..cfg.vars).filter(|&v| s.last_write[v].is_some()).collect();
                let Some(&v) = written.get(rng.random_range(0..written.len().max(1))) else { continue };
                let w = s.last_write[v].unwrap();
                let e = s.emit(h, EventKind::Read { var: format!("x{v}") });
                s.t.add_edge(Rel::Rf, w, e);
            }
            _ if can_post => {
                let to = rng.random_range(0..k);
                let e = s.emit(h, EventKind::Post { receiver: to });
                s.queue[to].push_back(e);
                posts_to[to].push(e);
            }
            _ => {}
        }
    }
    let mut t = s.t;
    for h in 0..k {
        if let Some(l) = s.initial_last[h] {
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
    for ws in &s.writes {
        for w in ws.windows(2) {
            t.add_edge(Rel::Co, w[0], w[1]);
        }
    }
    t
}

/// A consistent partial trace.
pub fn random_partial_trace<R: Rng>(rng: &mut R, cfg: &GenConfig) -> TraceGraph {
    random_full_trace(rng, cfg).to_partial()
}

/// Rewires one `rf` edge to another write of the same variable, or
/// reshuffles the coherence order of one variable. Returns the input
/// unchanged when neither applies. The result is still well formed.
pub fn mutate<R: Rng>(rng: &mut R, t: &TraceGraph) -> TraceGraph {
    let mut out = t.clone();
    let writes_of = |var: &str| -> Vec<EventId> {
        (0..t.num_events()).filter(|&e| matches!(&t.event(e).kind, EventKind::Write { var: v, .. } if v == var)).collect()
    };
    let rfs: Vec<(EventId, EventId)> = t.pairs(Rel::Rf).collect();
    if !rfs.is_empty() && rng.random_bool(0.5) {
        let (w, r) = rfs[rng.random_range(0..rfs.len())];
        let var = t.event(r).kind.var().expect("read").to_string();
        let others: Vec<EventId> = writes_of(&var).into_iter().filter(|&x| x != w).collect();
        if let Some(&nw) = others.get(rng.random_range(0..others.len().max(1))) {
            out.remove_edge(Rel::Rf, w, r);
            out.add_edge(Rel::Rf, nw, r);
            return out;
        }
    }
    let mut vars: Vec<String> = t.events().iter().filter_map(|e| match &e.kind {
        EventKind::Write { var, .. } => Some(var.clone()),
        _ => None,
    }).collect();
    vars.sort();
    vars.dedup();
    vars.retain(|v| writes_of(v).len() > 1);
    if vars.is_empty() {
        return out;
    }
    let var = &vars[rng.random_range(0..vars.len())];
    let ws = writes_of(var);
    for (a, b) in t.pairs(Rel::Co).collect::<Vec<_>>() {
        if ws.contains(&a) {
            out.remove_edge(Rel::Co, a, b);
        }
    }
    let mut order = ws;
    order.shuffle(rng);
    for w in order.windows(2) {
        out.add_edge(Rel::Co, w[0], w[1]);
    }
    out
}

/// The differential-testing corpus: trace `i` comes from seed `i`, uses
/// nested posting for even `i`, and every third trace is mutated.
pub fn small_corpus(count: usize) -> Vec<TraceGraph> {
    use rand::SeedableRng;
    (0..count)
        .map(|i| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(i as u64);
            let cfg = GenConfig { nested: i % 2 == 0, ..Default::default() };
            let t = random_partial_trace(&mut rng, &cfg);
            if i % 3 == 0 {
                mutate(&mut rng, &t)
            } else {
                t
            }
        })
        .collect()
}
