//! Reachability checker for traces without nested posts.
//!
//! When every post sits in an initial message, the posts from `i` to `j`
//! form a stream fixed by program order. A configuration records, per
//! handler, the position in its initial message, which posted message runs
//! and how far it got, how many messages of each stream were got, and the
//! mailbox as a sequence of stream labels in posting order. An event may run
//! once all of its static happens-before predecessors have run; a get always
//! takes the mailbox head.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::analysis::Analysis;
use crate::trace::{EventId, EventKind, TraceGraph, ValidationReport, Witness};
use crate::Outcome;

#[derive(Debug, Error)]
pub enum NonestError {
    #[error("invalid trace: {0}")]
    Invalid(ValidationReport),
    #[error("nested posts: {}", .0.join(", "))]
    Nested(Vec<String>),
}

/// Posts outside initial messages, by id.
pub fn assert_no_nesting(t: &TraceGraph) -> Result<(), NonestError> {
    let an = Analysis::new(t).map_err(NonestError::Invalid)?;
    nested_posts(t, &an)
}

fn nested_posts(t: &TraceGraph, an: &Analysis) -> Result<(), NonestError> {
    let bad: Vec<String> = t
        .events()
        .iter()
        .enumerate()
        .filter(|(e, ev)| ev.kind.is_post() && !an.ms.is_initial(an.ms.msg_of[*e]))
        .map(|(_, ev)| ev.name.clone())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(NonestError::Nested(bad))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NonestStats {
    pub visited: usize,
    pub events: usize,
    pub handlers: usize,
}

impl NonestStats {
    /// `log((n+2)^(k²+k))`.
    pub fn log_bound(&self) -> f64 {
        let k = self.handlers as f64;
        (k * k + k) * ((self.events + 2) as f64).ln()
    }

    pub fn within_bound(&self) -> bool {
        (self.visited.max(1) as f64).ln() <= self.log_bound() + 1e-9
    }
}

#[derive(Clone, Debug)]
pub struct NonestReport {
    pub outcome: Outcome,
    pub stats: NonestStats,
}

#[derive(Clone, Copy, Debug)]
enum Place {
    Initial { pos: usize },
    Posted { src: usize, k: usize, pos: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Config {
    ipos: Vec<u32>,
    /// Running message: (stream source, index, next position).
    cur: Vec<Option<(u16, u32, u32)>>,
    /// got[src * k + dst]
    got: Vec<u32>,
    queue: Vec<Vec<u16>>,
}

struct Model<'a> {
    t: &'a TraceGraph,
    an: &'a Analysis,
    k: usize,
    place: Vec<Place>,
    /// streams[src * k + dst]: messages in posting order; None if pending.
    streams: Vec<Vec<Option<usize>>>,
    preds: Vec<Vec<EventId>>,
}

impl<'a> Model<'a> {
    fn new(t: &'a TraceGraph, an: &'a Analysis) -> Model<'a> {
        let k = t.num_handlers();
        let mut place = vec![Place::Initial { pos: 0 }; an.n];
        let mut streams = vec![Vec::new(); k * k];
        for h in 0..k {
            let init = &an.ms.messages[an.ms.initial[h]];
            for (pos, &e) in init.events.iter().enumerate() {
                place[e] = Place::Initial { pos };
                if let EventKind::Post { receiver } = t.event(e).kind {
                    let m = t.pairs(crate::trace::Rel::Pb).find(|&(p, _)| p == e).map(|(_, g)| an.ms.msg_of[g]);
                    streams[h * k + receiver].push(m);
                }
            }
        }
        for src in 0..k {
            for dst in 0..k {
                for (i, m) in streams[src * k + dst].iter().enumerate() {
                    if let Some(m) = *m {
                        for (pos, &e) in an.ms.messages[m].events.iter().enumerate() {
                            place[e] = Place::Posted { src, k: i, pos };
                        }
                    }
                }
            }
        }
        let mut preds = vec![Vec::new(); an.n];
        for &(a, b) in &an.static_edges {
            preds[b].push(a);
        }
        Model { t, an, k, place, streams, preds }
    }

    fn initial(&self) -> Config {
        Config {
            ipos: vec![0; self.k],
            cur: vec![None; self.k],
            got: vec![0; self.k * self.k],
            queue: vec![Vec::new(); self.k],
        }
    }

    fn executed(&self, c: &Config, e: EventId) -> bool {
        let h = self.t.event(e).handler;
        match self.place[e] {
            Place::Initial { pos } => pos < c.ipos[h] as usize,
            Place::Posted { src, k, pos } => match c.cur[h] {
                Some((s, i, p)) if s as usize == src && i as usize == k => pos < p as usize,
                _ => k < c.got[src * self.k + h] as usize,
            },
        }
    }

    fn ready(&self, c: &Config, e: EventId) -> bool {
        self.preds[e].iter().all(|&p| self.executed(c, p))
    }

    /// Successor configurations with the event that leads there.
    fn successors(&self, c: &Config) -> Vec<(EventId, Config)> {
        let mut out = Vec::new();
        for h in 0..self.k {
            let init = &self.an.ms.messages[self.an.ms.initial[h]].events;
            let ip = c.ipos[h] as usize;
            if ip < init.len() {
                let e = init[ip];
                if self.ready(c, e) {
                    let mut d = c.clone();
                    d.ipos[h] += 1;
                    if let EventKind::Post { receiver } = self.t.event(e).kind {
                        d.queue[receiver].push(h as u16);
                    }
                    out.push((e, d));
                }
                continue;
            }
            if let Some((s, i, p)) = c.cur[h] {
                let m = self.streams[s as usize * self.k + h][i as usize].unwrap();
                let evs = &self.an.ms.messages[m].events;
                let e = evs[p as usize];
                if self.ready(c, e) {
                    let mut d = c.clone();
                    d.cur[h] = if p as usize + 1 == evs.len() { None } else { Some((s, i, p + 1)) };
                    out.push((e, d));
                }
                continue;
            }
            let Some(&src) = c.queue[h].first() else { continue };
            let i = c.got[src as usize * self.k + h];
            let Some(m) = self.streams[src as usize * self.k + h][i as usize] else { continue };
            let evs = &self.an.ms.messages[m].events;
            let g = evs[0];
            if self.ready(c, g) {
                let mut d = c.clone();
                d.queue[h].remove(0);
                d.got[src as usize * self.k + h] += 1;
                d.cur[h] = if evs.len() == 1 { None } else { Some((src, i, 1)) };
                out.push((g, d));
            }
        }
        out
    }

    fn executed_count(&self, c: &Config) -> usize {
        (0..self.an.n).filter(|&e| self.executed(c, e)).count()
    }
}

pub fn check_nonest(t: &TraceGraph) -> Result<NonestReport, NonestError> {
    let an = Analysis::new(t).map_err(NonestError::Invalid)?;
    nested_posts(t, &an)?;
    let model = Model::new(t, &an);
    let mut stats = NonestStats { visited: 0, events: an.n, handlers: t.num_handlers() };

    let start = model.initial();
    let mut states: Vec<(Config, Option<(usize, EventId)>, usize)> = vec![(start.clone(), None, 0)];
    let mut seen: HashMap<Config, usize> = HashMap::from([(start, 0)]);
    let mut frontier = VecDeque::from([0usize]);
    let mut goal = None;
    while let Some(s) = frontier.pop_front() {
        let depth = states[s].2;
        debug_assert_eq!(model.executed_count(&states[s].0), depth);
        if depth == an.n {
            goal = Some(s);
            break;
        }
        for (e, d) in model.successors(&states[s].0) {
            if seen.contains_key(&d) {
                continue;
            }
            let id = states.len();
            seen.insert(d.clone(), id);
            states.push((d, Some((s, e)), depth + 1));
            frontier.push_back(id);
        }
    }
    stats.visited = states.len();
    let outcome = match goal {
        None => Outcome::Inconsistent,
        Some(mut s) => {
            let mut lin = Vec::with_capacity(an.n);
            while let Some((p, e)) = states[s].1 {
                lin.push(e);
                s = p;
            }
            lin.reverse();
            Outcome::Consistent(Witness::from_linearization(t, lin))
        }
    };
    Ok(NonestReport { outcome, stats })
}
