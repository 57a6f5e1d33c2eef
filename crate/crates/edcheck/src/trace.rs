//! Events, (partial) traces, well-formedness and the happens-before test.
//!
//! Event and handler ids are dense indices into the graph; the string names
//! only matter for files and diagnostics.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::fmt;

use fixedbitset::FixedBitSet;
use thiserror::Error;

pub type EventId = usize;
pub type HandlerId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Write { var: String, val: i64 },
    Read { var: String },
    Post { receiver: HandlerId },
    Get,
}

impl EventKind {
    pub fn var(&self) -> Option<&str> {
        match self {
            EventKind::Write { var, .. } | EventKind::Read { var } => Some(var),
            _ => None,
        }
    }

    pub fn is_get(&self) -> bool {
        matches!(self, EventKind::Get)
    }

    pub fn is_post(&self) -> bool {
        matches!(self, EventKind::Post { .. })
    }

    pub fn is_write(&self) -> bool {
        matches!(self, EventKind::Write { .. })
    }

    pub fn is_read(&self) -> bool {
        matches!(self, EventKind::Read { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Write { .. } => "write",
            EventKind::Read { .. } => "read",
            EventKind::Post { .. } => "post",
            EventKind::Get => "get",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub name: String,
    pub handler: HandlerId,
    pub kind: EventKind,
}

/// Relation labels. `Mo` and `Eo` are the guessable ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Po,
    Rf,
    Co,
    Pb,
    Mo,
    Eo,
}

impl Rel {
    pub const ALL: [Rel; 6] = [Rel::Po, Rel::Rf, Rel::Co, Rel::Pb, Rel::Mo, Rel::Eo];

    pub fn name(self) -> &'static str {
        match self {
            Rel::Po => "po",
            Rel::Rf => "rf",
            Rel::Co => "co",
            Rel::Pb => "pb",
            Rel::Mo => "mo",
            Rel::Eo => "eo",
        }
    }

    pub fn from_name(s: &str) -> Option<Rel> {
        Rel::ALL.into_iter().find(|r| r.name() == s)
    }

    pub fn is_guessable(self) -> bool {
        matches!(self, Rel::Mo | Rel::Eo)
    }
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub rel: Rel,
    pub src: EventId,
    pub dst: EventId,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("duplicate handler '{0}'")]
    DuplicateHandler(String),
    #[error("duplicate event id '{0}'")]
    DuplicateEvent(String),
    #[error("unknown handler '{0}'")]
    UnknownHandler(String),
    #[error("unknown event '{0}'")]
    UnknownEvent(String),
}

#[derive(Clone, Debug, Default)]
pub struct TraceGraph {
    handlers: Vec<String>,
    events: Vec<Event>,
    edges: BTreeSet<Edge>,
    handler_index: HashMap<String, HandlerId>,
    event_index: HashMap<String, EventId>,
}

impl TraceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_handler(&mut self, name: &str) -> Result<HandlerId, TraceError> {
        if self.handler_index.contains_key(name) {
            return Err(TraceError::DuplicateHandler(name.to_string()));
        }
        let id = self.handlers.len();
        self.handlers.push(name.to_string());
        self.handler_index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_event(
        &mut self,
        name: &str,
        handler: HandlerId,
        kind: EventKind,
    ) -> Result<EventId, TraceError> {
        if self.event_index.contains_key(name) {
            return Err(TraceError::DuplicateEvent(name.to_string()));
        }
        if handler >= self.handlers.len() {
            return Err(TraceError::UnknownHandler(format!("#{handler}")));
        }
        if let EventKind::Post { receiver } = kind {
            if receiver >= self.handlers.len() {
                return Err(TraceError::UnknownHandler(format!("#{receiver}")));
            }
        }
        let id = self.events.len();
        self.events.push(Event { name: name.to_string(), handler, kind });
        self.event_index.insert(name.to_string(), id);
        Ok(id)
    }

    /// Endpoints are not checked here; `validate` reports dangling ones.
    pub fn add_edge(&mut self, rel: Rel, src: EventId, dst: EventId) -> bool {
        self.edges.insert(Edge { rel, src, dst })
    }

    pub fn remove_edge(&mut self, rel: Rel, src: EventId, dst: EventId) -> bool {
        self.edges.remove(&Edge { rel, src, dst })
    }

    pub fn handlers(&self) -> &[String] {
        &self.handlers
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, id: EventId) -> &Event {
        &self.events[id]
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn num_handlers(&self) -> usize {
        self.handlers.len()
    }

    pub fn handler_id(&self, name: &str) -> Option<HandlerId> {
        self.handler_index.get(name).copied()
    }

    pub fn event_id(&self, name: &str) -> Option<EventId> {
        self.event_index.get(name).copied()
    }

    pub fn name(&self, id: EventId) -> &str {
        self.events.get(id).map(|e| e.name.as_str()).unwrap_or("<dangling>")
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn pairs(&self, rel: Rel) -> impl Iterator<Item = (EventId, EventId)> + '_ {
        self.edges.iter().filter(move |e| e.rel == rel).map(|e| (e.src, e.dst))
    }

    pub fn has_rel(&self, rel: Rel) -> bool {
        self.edges.iter().any(|e| e.rel == rel)
    }

    pub fn has_edge(&self, rel: Rel, src: EventId, dst: EventId) -> bool {
        self.edges.contains(&Edge { rel, src, dst })
    }

    /// Copy without the guessable relations.
    pub fn to_partial(&self) -> TraceGraph {
        let mut t = self.clone();
        t.edges.retain(|e| !e.rel.is_guessable());
        t
    }

    pub fn events_of(&self, h: HandlerId) -> impl Iterator<Item = EventId> + '_ {
        self.events.iter().enumerate().filter(move |(_, e)| e.handler == h).map(|(i, _)| i)
    }

    /// Adds the po edges "initial message before every get" that the po
    /// definition mandates but files may omit.
    pub fn with_initial_precedence(&self) -> TraceGraph {
        let mut t = self.clone();
        if let Ok(ms) = derive_messages(self) {
            for h in 0..self.num_handlers() {
                let init = &ms.messages[ms.initial[h]];
                if let Some(&last) = init.events.last() {
                    for &m in &ms.posted[h] {
                        let g = ms.messages[m].get.expect("posted message has a get");
                        t.add_edge(Rel::Po, last, g);
                    }
                }
            }
        }
        t
    }
}

// ---------------------------------------------------------------------------
// Small order utilities

pub(crate) enum OrderProblem {
    Cycle(Vec<EventId>),
    NotTotal(EventId, EventId),
}

pub(crate) struct LocalClosure {
    pub topo: Vec<usize>,
    /// Strict descendants, local indices.
    pub desc: Vec<FixedBitSet>,
}

/// Transitive closure of `edges` over `nodes`; `Err` carries a cycle.
pub(crate) fn local_closure(
    nodes: &[EventId],
    edges: &[(EventId, EventId)],
) -> Result<LocalClosure, Vec<EventId>> {
    let index: HashMap<EventId, usize> = nodes.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let n = nodes.len();
    let mut succ = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for &(a, b) in edges {
        if let (Some(&x), Some(&y)) = (index.get(&a), index.get(&b)) {
            succ[x].push(y);
            indeg[y] += 1;
        }
    }
    let mut topo = Vec::with_capacity(n);
    let mut heap: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    while let Some(Reverse(x)) = heap.pop() {
        topo.push(x);
        for &y in &succ[x] {
            indeg[y] -= 1;
            if indeg[y] == 0 {
                heap.push(Reverse(y));
            }
        }
    }
    if topo.len() < n {
        let adj: Vec<Vec<usize>> = succ.clone();
        let alive: Vec<bool> = (0..n).map(|i| indeg[i] > 0).collect();
        let cyc = shortest_cycle(&adj, &alive).unwrap_or_default();
        return Err(cyc.into_iter().map(|i| nodes[i]).collect());
    }
    let mut desc = vec![FixedBitSet::with_capacity(n); n];
    for &x in topo.iter().rev() {
        let mut d = FixedBitSet::with_capacity(n);
        for &y in &succ[x] {
            d.insert(y);
            d.union_with(&desc[y]);
        }
        desc[x] = d;
    }
    Ok(LocalClosure { topo, desc })
}

/// Orders `nodes` under `edges` (restricted to `nodes`): the total order, or
/// the reason it is not one.
pub(crate) fn total_order(
    nodes: &[EventId],
    edges: &[(EventId, EventId)],
) -> Result<Vec<EventId>, OrderProblem> {
    let c = local_closure(nodes, edges).map_err(OrderProblem::Cycle)?;
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if !c.desc[i].contains(j) && !c.desc[j].contains(i) {
                return Err(OrderProblem::NotTotal(nodes[i], nodes[j]));
            }
        }
    }
    Ok(c.topo.iter().map(|&i| nodes[i]).collect())
}

/// Shortest cycle among `alive` nodes, by BFS from each candidate.
pub(crate) fn shortest_cycle(adj: &[Vec<usize>], alive: &[bool]) -> Option<Vec<usize>> {
    let n = adj.len();
    let mut best: Option<Vec<usize>> = None;
    let mut parent = vec![usize::MAX; n];
    for s in 0..n {
        if !alive[s] {
            continue;
        }
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        let mut q = VecDeque::from([s]);
        let mut found = None;
        'bfs: while let Some(x) = q.pop_front() {
            for &y in &adj[x] {
                if !alive[y] {
                    continue;
                }
                if y == s {
                    found = Some(x);
                    break 'bfs;
                }
                if parent[y] == usize::MAX {
                    parent[y] = x;
                    q.push_back(y);
                }
            }
        }
        if let Some(mut x) = found {
            let mut cyc = vec![x];
            while x != s {
                x = parent[x];
                cyc.push(x);
            }
            cyc.reverse();
            if best.as_ref().is_none_or(|b| cyc.len() < b.len()) {
                let len = cyc.len();
                best = Some(cyc);
                if len <= 2 {
                    break;
                }
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Partial,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValidateOptions {
    pub mode: Mode,
    /// Report missing "initial message before gets" po edges instead of
    /// treating them as implied.
    pub strict: bool,
}

impl ValidateOptions {
    pub fn partial() -> Self {
        ValidateOptions { mode: Mode::Partial, strict: false }
    }

    pub fn full() -> Self {
        ValidateOptions { mode: Mode::Full, strict: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DanglingEdge { rel: Rel, src: EventId, dst: EventId },
    RfType { src: String, dst: String },
    RfNotFunctional { read: String, count: usize },
    RfMissing { read: String },
    CoType { src: String, dst: String },
    CoCycle { var: String, cycle: Vec<String> },
    CoNotTotal { var: String, a: String, b: String },
    PoCrossHandler { src: String, dst: String },
    PoCycle { cycle: Vec<String> },
    PoNotTotal { a: String, b: String },
    GetAfterGet { get: String, earlier: String },
    TwoGetAncestors { event: String },
    InitialNotBeforeGet { event: String, get: String },
    PbType { src: String, dst: String },
    PbPostTwice { post: String },
    PbGetTwice { get: String },
    PbGetMissing { get: String },
    GuessableInPartial { rel: Rel, src: String, dst: String },
    MoType { src: String, dst: String },
    EoType { src: String, dst: String },
    MoCycle { receiver: String, cycle: Vec<String> },
    MoNotTotal { receiver: String, a: String, b: String },
    EoCycle { handler: String, cycle: Vec<String> },
    EoNotTotal { handler: String, a: String, b: String },
    PendingOvertaken { pending: String, consumed: String },
}

impl Violation {
    /// Violations that the loader fixes on its own in non-strict mode.
    pub fn repairable(&self) -> bool {
        matches!(self, Violation::InitialNotBeforeGet { .. })
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            DanglingEdge { rel, src, dst } => {
                write!(f, "dangling {rel} edge endpoint: #{src} -> #{dst}")
            }
            RfType { src, dst } => write!(f, "rf type mismatch: {src} -> {dst}"),
            RfNotFunctional { read, count } => {
                write!(f, "rf not functional: read {read} has {count} incoming rf edges")
            }
            RfMissing { read } => write!(f, "rf missing: read {read} has no incoming rf edge"),
            CoType { src, dst } => write!(f, "co type mismatch: {src} -> {dst}"),
            CoCycle { var, cycle } => write!(f, "co cycle on {var}: {}", cycle.join(" -> ")),
            CoNotTotal { var, a, b } => write!(f, "co not total on {var}: {a} and {b} unordered"),
            PoCrossHandler { src, dst } => write!(f, "po edge crosses handlers: {src} -> {dst}"),
            PoCycle { cycle } => write!(f, "po cycle: {}", cycle.join(" -> ")),
            PoNotTotal { a, b } => write!(f, "po not total within a message: {a} and {b}"),
            GetAfterGet { get, earlier } => write!(f, "get {get} is po-after get {earlier}"),
            TwoGetAncestors { event } => write!(f, "event {event} has two get po-ancestors"),
            InitialNotBeforeGet { event, get } => {
                write!(f, "initial-message event {event} not po-before get {get}")
            }
            PbType { src, dst } => write!(f, "pb type mismatch: {src} -> {dst}"),
            PbPostTwice { post } => write!(f, "pb not injective: post {post} has several gets"),
            PbGetTwice { get } => write!(f, "pb not a function: get {get} has several posts"),
            PbGetMissing { get } => write!(f, "pb missing: get {get} has no post"),
            GuessableInPartial { rel, src, dst } => {
                write!(f, "{rel} edge {src} -> {dst} not allowed in a partial trace")
            }
            MoType { src, dst } => write!(f, "mo type mismatch: {src} -> {dst}"),
            EoType { src, dst } => write!(f, "eo type mismatch: {src} -> {dst}"),
            MoCycle { receiver, cycle } => {
                write!(f, "mo cycle on {receiver}: {}", cycle.join(" -> "))
            }
            MoNotTotal { receiver, a, b } => {
                write!(f, "mo not total on {receiver}: {a} and {b} unordered")
            }
            EoCycle { handler, cycle } => write!(f, "eo cycle on {handler}: {}", cycle.join(" -> ")),
            EoNotTotal { handler, a, b } => {
                write!(f, "eo not total on {handler}: {a} and {b} unordered")
            }
            PendingOvertaken { pending, consumed } => write!(
                f,
                "pending post {pending} is mo-before consumed post {consumed} on the same mailbox"
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

pub fn validate(t: &TraceGraph, opts: ValidateOptions) -> ValidationReport {
    let mut out = Vec::new();
    let n = t.num_events();
    let nm = |e: EventId| t.name(e).to_string();

    let mut typed_ok = true;
    for e in t.edges() {
        if e.src >= n || e.dst >= n {
            out.push(Violation::DanglingEdge { rel: e.rel, src: e.src, dst: e.dst });
            typed_ok = false;
        }
    }
    if !typed_ok {
        return ValidationReport { violations: out };
    }

    let ev = |e: EventId| &t.events[e];
    let mut rf_in = vec![0usize; n];
    let mut pb_out = vec![0usize; n];
    let mut pb_in = vec![0usize; n];
    for e in t.edges() {
        let (s, d) = (ev(e.src), ev(e.dst));
        match e.rel {
            Rel::Rf => {
                let ok = s.kind.is_write() && d.kind.is_read() && s.kind.var() == d.kind.var();
                if ok {
                    rf_in[e.dst] += 1;
                } else {
                    out.push(Violation::RfType { src: nm(e.src), dst: nm(e.dst) });
                }
            }
            Rel::Co => {
                if !(s.kind.is_write() && d.kind.is_write() && s.kind.var() == d.kind.var()) {
                    out.push(Violation::CoType { src: nm(e.src), dst: nm(e.dst) });
                }
            }
            Rel::Po => {
                if s.handler != d.handler {
                    out.push(Violation::PoCrossHandler { src: nm(e.src), dst: nm(e.dst) });
                }
            }
            Rel::Pb => {
                let ok = match s.kind {
                    EventKind::Post { receiver } => d.kind.is_get() && d.handler == receiver,
                    _ => false,
                };
                if ok {
                    pb_out[e.src] += 1;
                    pb_in[e.dst] += 1;
                } else {
                    out.push(Violation::PbType { src: nm(e.src), dst: nm(e.dst) });
                }
            }
            Rel::Mo | Rel::Eo if opts.mode == Mode::Partial => {
                out.push(Violation::GuessableInPartial {
                    rel: e.rel,
                    src: nm(e.src),
                    dst: nm(e.dst),
                });
            }
            Rel::Mo => {
                let ok = match (&s.kind, &d.kind) {
                    (EventKind::Post { receiver: a }, EventKind::Post { receiver: b }) => a == b,
                    _ => false,
                };
                if !ok {
                    out.push(Violation::MoType { src: nm(e.src), dst: nm(e.dst) });
                }
            }
            Rel::Eo => {
                if !(s.kind.is_get() && d.kind.is_get() && s.handler == d.handler) {
                    out.push(Violation::EoType { src: nm(e.src), dst: nm(e.dst) });
                }
            }
        }
    }

    for (i, e) in t.events.iter().enumerate() {
        match &e.kind {
            EventKind::Read { .. } if rf_in[i] > 1 => {
                out.push(Violation::RfNotFunctional { read: nm(i), count: rf_in[i] })
            }
            EventKind::Read { .. } if rf_in[i] == 0 => out.push(Violation::RfMissing { read: nm(i) }),
            EventKind::Post { .. } if pb_out[i] > 1 => out.push(Violation::PbPostTwice { post: nm(i) }),
            EventKind::Get if pb_in[i] > 1 => out.push(Violation::PbGetTwice { get: nm(i) }),
            EventKind::Get if pb_in[i] == 0 => out.push(Violation::PbGetMissing { get: nm(i) }),
            _ => {}
        }
    }

    // co: strict total order per variable.
    let mut writes: BTreeMap<&str, Vec<EventId>> = BTreeMap::new();
    for (i, e) in t.events.iter().enumerate() {
        if let EventKind::Write { var, .. } = &e.kind {
            writes.entry(var).or_default().push(i);
        }
    }
    let co: Vec<(EventId, EventId)> = t.pairs(Rel::Co).collect();
    for (var, ws) in &writes {
        match total_order(ws, &co) {
            Ok(_) => {}
            Err(OrderProblem::Cycle(c)) => out.push(Violation::CoCycle {
                var: var.to_string(),
                cycle: c.into_iter().map(nm).collect(),
            }),
            Err(OrderProblem::NotTotal(a, b)) => {
                out.push(Violation::CoNotTotal { var: var.to_string(), a: nm(a), b: nm(b) })
            }
        }
    }

    if let Err(vs) = message_analysis(t, opts.strict) {
        out.extend(vs);
    }

    if opts.mode == Mode::Full {
        let mo: Vec<(EventId, EventId)> = t.pairs(Rel::Mo).collect();
        let eo: Vec<(EventId, EventId)> = t.pairs(Rel::Eo).collect();
        for h in 0..t.num_handlers() {
            let hname = t.handlers[h].clone();
            let posts: Vec<EventId> = (0..n)
                .filter(|&i| matches!(t.events[i].kind, EventKind::Post { receiver } if receiver == h))
                .collect();
            match total_order(&posts, &mo) {
                Ok(order) => {
                    // A message still in the mailbox cannot be overtaken.
                    let mut seen_pending = None;
                    for &p in &order {
                        if pb_out[p] == 0 {
                            seen_pending.get_or_insert(p);
                        } else if let Some(q) = seen_pending {
                            out.push(Violation::PendingOvertaken { pending: nm(q), consumed: nm(p) });
                            break;
                        }
                    }
                }
                Err(OrderProblem::Cycle(c)) => out.push(Violation::MoCycle {
                    receiver: hname.clone(),
                    cycle: c.into_iter().map(nm).collect(),
                }),
                Err(OrderProblem::NotTotal(a, b)) => {
                    out.push(Violation::MoNotTotal { receiver: hname.clone(), a: nm(a), b: nm(b) })
                }
            }
            let gets: Vec<EventId> = t.events_of(h).filter(|&i| t.events[i].kind.is_get()).collect();
            match total_order(&gets, &eo) {
                Ok(_) => {}
                Err(OrderProblem::Cycle(c)) => out.push(Violation::EoCycle {
                    handler: hname.clone(),
                    cycle: c.into_iter().map(nm).collect(),
                }),
                Err(OrderProblem::NotTotal(a, b)) => {
                    out.push(Violation::EoNotTotal { handler: hname, a: nm(a), b: nm(b) })
                }
            }
        }
    }

    ValidationReport { violations: out }
}

// ---------------------------------------------------------------------------
// Messages

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub handler: HandlerId,
    /// `None` for the initial message.
    pub get: Option<EventId>,
    /// In po order; starts with the get for posted messages.
    pub events: Vec<EventId>,
}

impl Message {
    pub fn first(&self) -> Option<EventId> {
        self.events.first().copied()
    }

    pub fn last(&self) -> Option<EventId> {
        self.events.last().copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageStructure {
    pub messages: Vec<Message>,
    /// Per handler: index of its (possibly empty) initial message.
    pub initial: Vec<usize>,
    /// Per handler: posted messages, in file order of their gets.
    pub posted: Vec<Vec<usize>>,
    /// Per event: index of its message.
    pub msg_of: Vec<usize>,
}

impl MessageStructure {
    pub fn message_of(&self, e: EventId) -> &Message {
        &self.messages[self.msg_of[e]]
    }

    pub fn is_initial(&self, m: usize) -> bool {
        self.messages[m].get.is_none()
    }
}

/// Splits every handler's events into its initial message and one message
/// per get.
pub fn derive_messages(t: &TraceGraph) -> Result<MessageStructure, Vec<Violation>> {
    message_analysis(t, false)
}

fn message_analysis(t: &TraceGraph, strict: bool) -> Result<MessageStructure, Vec<Violation>> {
    let n = t.num_events();
    let nm = |e: EventId| t.name(e).to_string();
    let po: Vec<(EventId, EventId)> =
        t.pairs(Rel::Po).filter(|&(a, b)| a < n && b < n).collect();
    let mut violations = Vec::new();
    let mut messages = Vec::new();
    let mut initial = Vec::new();
    let mut posted = Vec::new();
    let mut msg_of = vec![usize::MAX; n];

    for h in 0..t.num_handlers() {
        let evs: Vec<EventId> = t.events_of(h).collect();
        let c = match local_closure(&evs, &po) {
            Ok(c) => c,
            Err(cycle) => {
                violations.push(Violation::PoCycle { cycle: cycle.into_iter().map(nm).collect() });
                continue;
            }
        };
        let gets: Vec<usize> = (0..evs.len()).filter(|&i| t.events[evs[i]].kind.is_get()).collect();
        // owner[i]: local index of the get whose message contains i.
        let mut owner: Vec<Option<usize>> = vec![None; evs.len()];
        let mut bad = false;
        for &g in &gets {
            owner[g] = Some(g);
        }
        for &g in &gets {
            for x in c.desc[g].ones() {
                if t.events[evs[x]].kind.is_get() {
                    violations.push(Violation::GetAfterGet { get: nm(evs[x]), earlier: nm(evs[g]) });
                    bad = true;
                } else if owner[x].is_some_and(|o| o != g) {
                    violations.push(Violation::TwoGetAncestors { event: nm(evs[x]) });
                    bad = true;
                } else {
                    owner[x] = Some(g);
                }
            }
        }
        if bad {
            continue;
        }
        let rank: HashMap<usize, usize> = c.topo.iter().enumerate().map(|(r, &i)| (i, r)).collect();
        let mut groups: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
        groups.entry(None).or_default();
        for &g in &gets {
            groups.entry(Some(g)).or_default();
        }
        for i in 0..evs.len() {
            groups.entry(owner[i]).or_default().push(i);
        }
        for members in groups.values_mut() {
            members.sort_by_key(|i| rank[i]);
            for w in 0..members.len() {
                for v in w + 1..members.len() {
                    let (a, b) = (members[w], members[v]);
                    if !c.desc[a].contains(b) && !c.desc[b].contains(a) {
                        violations.push(Violation::PoNotTotal { a: nm(evs[a]), b: nm(evs[b]) });
                        bad = true;
                    }
                }
            }
        }
        if bad {
            continue;
        }
        if strict {
            'outer: for &i in &groups[&None] {
                for &g in &gets {
                    if !c.desc[i].contains(g) {
                        violations.push(Violation::InitialNotBeforeGet {
                            event: nm(evs[i]),
                            get: nm(evs[g]),
                        });
                        break 'outer;
                    }
                }
            }
        }
        let mut ps = Vec::new();
        for (key, members) in groups {
            let idx = messages.len();
            let events: Vec<EventId> = members.iter().map(|&i| evs[i]).collect();
            for &e in &events {
                msg_of[e] = idx;
            }
            messages.push(Message { handler: h, get: key.map(|g| evs[g]), events });
            match key {
                None => initial.push(idx),
                Some(_) => ps.push(idx),
            }
        }
        // groups iterate gets in local order, which is file order.
        posted.push(ps);
    }
    if violations.is_empty() {
        Ok(MessageStructure { messages, initial, posted, msg_of })
    } else {
        Err(violations)
    }
}

// ---------------------------------------------------------------------------
// Derived relations

pub type Pairs = BTreeSet<(EventId, EventId)>;

fn co_closure(t: &TraceGraph) -> HashMap<EventId, Vec<EventId>> {
    let mut succ: HashMap<EventId, Vec<EventId>> = HashMap::new();
    for (a, b) in t.pairs(Rel::Co) {
        succ.entry(a).or_default().push(b);
    }
    let mut out = HashMap::new();
    for &w in succ.keys() {
        let mut seen = BTreeSet::new();
        let mut stack = vec![w];
        while let Some(x) = stack.pop() {
            for &y in succ.get(&x).into_iter().flatten() {
                if seen.insert(y) {
                    stack.push(y);
                }
            }
        }
        out.insert(w, seen.into_iter().collect());
    }
    out
}

/// fr = rf⁻¹ ; co⁺
pub fn derived_fr(t: &TraceGraph) -> Pairs {
    let co = co_closure(t);
    let mut out = Pairs::new();
    for (w0, r) in t.pairs(Rel::Rf) {
        for &w in co.get(&w0).into_iter().flatten() {
            out.insert((r, w));
        }
    }
    out
}

/// qo = pb⁻¹ ; mo ; pb
pub fn derived_qo(t: &TraceGraph, mo: &Pairs) -> Pairs {
    let get_of: HashMap<EventId, EventId> = t.pairs(Rel::Pb).collect();
    mo.iter()
        .filter_map(|(p1, p2)| Some((*get_of.get(p1)?, *get_of.get(p2)?)))
        .collect()
}

/// eo† = (po⁻¹)* ; eo ; po*
pub fn derived_eo_dagger(t: &TraceGraph, eo: &Pairs) -> Pairs {
    // Plain reachability rather than `local_closure`, so that the result
    // stays monotone even when po is cyclic or crosses handlers.
    let mut succ: HashMap<EventId, Vec<EventId>> = HashMap::new();
    for (a, b) in t.pairs(Rel::Po) {
        if t.event(a).handler == t.event(b).handler {
            succ.entry(a).or_default().push(b);
        }
    }
    let mut after: HashMap<EventId, Vec<EventId>> = HashMap::new();
    let mut tail = |g: EventId| -> Vec<EventId> {
        after
            .entry(g)
            .or_insert_with(|| {
                let mut seen = BTreeSet::from([g]);
                let mut stack = vec![g];
                while let Some(x) = stack.pop() {
                    for &y in succ.get(&x).into_iter().flatten() {
                        if seen.insert(y) {
                            stack.push(y);
                        }
                    }
                }
                seen.into_iter().collect()
            })
            .clone()
    };
    let mut out = Pairs::new();
    for &(g1, g2) in eo {
        let (a, b) = (tail(g1), tail(g2));
        for &x in &a {
            for &y in &b {
                out.insert((x, y));
            }
        }
    }
    out
}

/// Effective po: the closure of the given edges plus the implied
/// initial-message precedence.
pub fn effective_po(t: &TraceGraph) -> Pairs {
    let po: Vec<(EventId, EventId)> = t.pairs(Rel::Po).collect();
    let ms = derive_messages(t).ok();
    let mut out = Pairs::new();
    for h in 0..t.num_handlers() {
        let evs: Vec<EventId> = t.events_of(h).collect();
        if let Ok(c) = local_closure(&evs, &po) {
            for (i, &a) in evs.iter().enumerate() {
                for j in c.desc[i].ones() {
                    out.insert((a, evs[j]));
                }
            }
        }
        if let Some(ms) = &ms {
            for &a in &ms.messages[ms.initial[h]].events {
                for &m in &ms.posted[h] {
                    for &b in &ms.messages[m].events {
                        out.insert((a, b));
                    }
                }
            }
        }
    }
    out
}

/// All hb edges of a full trace, labelled with the relation they stem from.
pub fn hb_edges(t: &TraceGraph) -> Vec<(&'static str, EventId, EventId)> {
    let mo: Pairs = t.pairs(Rel::Mo).collect();
    let eo: Pairs = t.pairs(Rel::Eo).collect();
    let mut out = Vec::new();
    out.extend(effective_po(t).into_iter().map(|(a, b)| ("po", a, b)));
    for rel in [Rel::Rf, Rel::Co, Rel::Pb, Rel::Mo] {
        out.extend(t.pairs(rel).map(|(a, b)| (rel.name(), a, b)));
    }
    out.extend(derived_fr(t).into_iter().map(|(a, b)| ("fr", a, b)));
    out.extend(derived_eo_dagger(t, &eo).into_iter().map(|(a, b)| ("eo+", a, b)));
    out.extend(derived_qo(t, &mo).into_iter().map(|(a, b)| ("qo", a, b)));
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HbResult {
    Acyclic(Vec<EventId>),
    Cyclic(Vec<EventId>),
}

impl HbResult {
    pub fn is_acyclic(&self) -> bool {
        matches!(self, HbResult::Acyclic(_))
    }
}

/// Topologically sorts hb; ties are broken by event index.
pub fn hb_acyclic(t: &TraceGraph) -> HbResult {
    let edges: Vec<(EventId, EventId)> = hb_edges(t).into_iter().map(|(_, a, b)| (a, b)).collect();
    sort_or_cycle(t.num_events(), &edges)
}

pub(crate) fn sort_or_cycle(n: usize, edges: &[(EventId, EventId)]) -> HbResult {
    let mut adj = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for &(a, b) in edges {
        adj[a].push(b);
        indeg[b] += 1;
    }
    let mut heap: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(x)) = heap.pop() {
        order.push(x);
        for &y in &adj[x] {
            indeg[y] -= 1;
            if indeg[y] == 0 {
                heap.push(Reverse(y));
            }
        }
    }
    if order.len() == n {
        return HbResult::Acyclic(order);
    }
    let alive: Vec<bool> = indeg.iter().map(|&d| d > 0).collect();
    HbResult::Cyclic(shortest_cycle(&adj, &alive).unwrap_or_default())
}

// ---------------------------------------------------------------------------
// Witnesses

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Witness {
    /// Receiver → posts in mailbox order.
    pub mo: BTreeMap<HandlerId, Vec<EventId>>,
    /// Handler → gets in execution order.
    pub eo: BTreeMap<HandlerId, Vec<EventId>>,
    pub linearization: Vec<EventId>,
}

impl Witness {
    /// Projects mo and eo out of a total order of all events.
    pub fn from_linearization(t: &TraceGraph, lin: Vec<EventId>) -> Witness {
        let mut mo: BTreeMap<HandlerId, Vec<EventId>> = BTreeMap::new();
        let mut eo: BTreeMap<HandlerId, Vec<EventId>> = BTreeMap::new();
        for &e in &lin {
            let ev = t.event(e);
            match ev.kind {
                EventKind::Post { receiver } => mo.entry(receiver).or_default().push(e),
                EventKind::Get => eo.entry(ev.handler).or_default().push(e),
                _ => {}
            }
        }
        Witness { mo, eo, linearization: lin }
    }

    /// The full trace: `t` plus mo/eo chains.
    pub fn apply(&self, t: &TraceGraph) -> TraceGraph {
        let mut full = t.clone();
        for seq in self.mo.values().chain(self.eo.values()) {
            let rel = if t.event(seq[0]).kind.is_post() { Rel::Mo } else { Rel::Eo };
            for w in seq.windows(2) {
                full.add_edge(rel, w[0], w[1]);
            }
        }
        full
    }

    /// Full verification: well-formed extension, FIFO, acyclic hb, and a
    /// linearization that respects every hb edge.
    pub fn check(&self, t: &TraceGraph) -> Result<(), String> {
        let n = t.num_events();
        let mut pos = vec![usize::MAX; n];
        for (i, &e) in self.linearization.iter().enumerate() {
            if e >= n || pos[e] != usize::MAX {
                return Err(format!("linearization is not a permutation (at position {i})"));
            }
            pos[e] = i;
        }
        if self.linearization.len() != n {
            return Err("linearization misses events".into());
        }
        let full = self.apply(t);
        let report = validate(&full, ValidateOptions::full());
        if !report.is_ok() {
            return Err(format!("extension is not a trace: {report}"));
        }
        let get_of: HashMap<EventId, EventId> = t.pairs(Rel::Pb).collect();
        for (&h, posts) in &self.mo {
            let from_mo: Vec<EventId> = posts.iter().filter_map(|p| get_of.get(p).copied()).collect();
            let eo = self.eo.get(&h).cloned().unwrap_or_default();
            if from_mo != eo {
                return Err(format!("eo on {} is not the FIFO image of mo", t.handlers()[h]));
            }
        }
        if let HbResult::Cyclic(c) = hb_acyclic(&full) {
            let names: Vec<&str> = c.iter().map(|&e| t.name(e)).collect();
            return Err(format!("hb cycle: {}", names.join(" -> ")));
        }
        for (rel, a, b) in hb_edges(&full) {
            if pos[a] >= pos[b] {
                return Err(format!(
                    "linearization violates {rel} edge {} -> {}",
                    t.name(a),
                    t.name(b)
                ));
            }
        }
        Ok(())
    }
}
