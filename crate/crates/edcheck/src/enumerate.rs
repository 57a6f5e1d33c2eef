//! Saturation followed by enumeration of mailbox orders.
//!
//! The execution order of a mailbox is the pb-image of its mailbox order
//! (anything else closes a `qo`/`eo` cycle), so only message orders are
//! enumerated. Per ordered pair of messages `a < b` on a mailbox the choice
//! contributes two edges, `last(a) → get(b)` and `post(a) → post(b)`.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use fixedbitset::FixedBitSet;

use crate::analysis::Analysis;
use crate::trace::{sort_or_cycle, EventId, HandlerId, HbResult, TraceGraph, ValidationReport};
use crate::Outcome;

#[derive(Clone, Debug)]
pub struct EnumConfig {
    pub saturate: bool,
    /// Maximum number of full acyclicity checks.
    pub budget: Option<u64>,
    pub timeout: Option<Duration>,
}

impl Default for EnumConfig {
    fn default() -> Self {
        EnumConfig { saturate: true, budget: Some(10_000_000), timeout: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EnumStats {
    pub checks: u64,
    pub committed: usize,
    pub rounds: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SaturationState {
    /// Ordered get pairs every consistent extension must respect.
    pub committed_eo: BTreeSet<(EventId, EventId)>,
    /// The same pairs on the posts, plus consumed-before-pending posts.
    pub committed_mo: BTreeSet<(EventId, EventId)>,
    /// Committed message pairs `(a, b)`: `a` executes before `b`.
    pub committed_msgs: BTreeSet<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Saturation {
    Saturated(SaturationState),
    Inconsistent(Vec<EventId>),
}

/// Reflexive-transitive reachability, kept closed under edge insertion.
struct Reach {
    rows: Vec<FixedBitSet>,
}

impl Reach {
    fn new(n: usize, edges: &[(EventId, EventId)]) -> Result<Reach, Vec<EventId>> {
        let order = match sort_or_cycle(n, edges) {
            HbResult::Acyclic(o) => o,
            HbResult::Cyclic(c) => return Err(c),
        };
        let mut succ = vec![Vec::new(); n];
        for &(a, b) in edges {
            succ[a].push(b);
        }
        let mut rows = vec![FixedBitSet::with_capacity(n); n];
        for &x in order.iter().rev() {
            let mut r = FixedBitSet::with_capacity(n);
            r.insert(x);
            for &y in &succ[x] {
                r.union_with(&rows[y]);
            }
            rows[x] = r;
        }
        Ok(Reach { rows })
    }

    fn reaches(&self, a: EventId, b: EventId) -> bool {
        self.rows[a].contains(b)
    }

    fn add(&mut self, u: EventId, v: EventId) {
        if self.reaches(u, v) {
            return;
        }
        let target = self.rows[v].clone();
        for x in 0..self.rows.len() {
            if self.rows[x].contains(u) {
                self.rows[x].union_with(&target);
            }
        }
    }
}

/// Does orienting `a` before `b` close a cycle?
fn closes_cycle(an: &Analysis, r: &Reach, a: usize, b: usize) -> bool {
    let (la, gb, pa, pb) = (an.last(a), an.get(b), an.post(a), an.post(b));
    r.reaches(gb, la) || r.reaches(pb, pa) || (r.reaches(gb, pa) && r.reaches(pb, la))
}

fn commit(an: &Analysis, r: &mut Reach, st: &mut SaturationState, a: usize, b: usize) {
    r.add(an.last(a), an.get(b));
    r.add(an.post(a), an.post(b));
    st.committed_msgs.insert((a, b));
    st.committed_eo.insert((an.get(a), an.get(b)));
    st.committed_mo.insert((an.post(a), an.post(b)));
}

fn saturate_with(an: &Analysis, stats: &mut EnumStats) -> Saturation {
    let mut r = match Reach::new(an.n, &an.static_edges) {
        Ok(r) => r,
        Err(c) => return Saturation::Inconsistent(c),
    };
    let mut st = SaturationState::default();
    for mb in &an.mailboxes {
        for &m in &mb.consumed {
            for &q in &mb.pending {
                st.committed_mo.insert((an.post(m), q));
            }
        }
    }
    let pairs: Vec<(usize, usize)> = an
        .mailboxes
        .iter()
        .flat_map(|mb| {
            let c = &mb.consumed;
            (0..c.len()).flat_map(move |i| (i + 1..c.len()).map(move |j| (c[i], c[j])))
        })
        .collect();
    let mut open: Vec<bool> = vec![true; pairs.len()];
    loop {
        stats.rounds += 1;
        let mut changed = false;
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if !open[k] {
                continue;
            }
            let fwd = closes_cycle(an, &r, a, b);
            let bwd = closes_cycle(an, &r, b, a);
            match (fwd, bwd) {
                (true, true) => {
                    let mut extra = an.order_edges(&[(0, vec![a, b])]);
                    extra.extend(st.committed_msgs.iter().flat_map(|&(x, y)| an.order_edges(&[(0, vec![x, y])])));
                    let cycle = match an.linearize(&extra) {
                        HbResult::Cyclic(c) => c,
                        HbResult::Acyclic(_) => vec![an.get(a), an.get(b)],
                    };
                    return Saturation::Inconsistent(cycle);
                }
                (false, true) => commit(an, &mut r, &mut st, a, b),
                (true, false) => commit(an, &mut r, &mut st, b, a),
                (false, false) => continue,
            }
            open[k] = false;
            changed = true;
            stats.committed += 1;
        }
        if !changed {
            break;
        }
    }
    Saturation::Saturated(st)
}

/// Applies the saturation rules to a fixed point.
pub fn saturate(t: &TraceGraph) -> Result<Saturation, ValidationReport> {
    let an = Analysis::new(t)?;
    Ok(saturate_with(&an, &mut EnumStats::default()))
}

#[derive(Clone, Debug)]
pub struct EnumReport {
    pub outcome: Outcome,
    pub stats: EnumStats,
}

pub fn check_enum(t: &TraceGraph) -> Result<Outcome, ValidationReport> {
    Ok(check_enum_with(t, &EnumConfig::default())?.outcome)
}

pub fn check_enum_with(t: &TraceGraph, cfg: &EnumConfig) -> Result<EnumReport, ValidationReport> {
    let an = Analysis::new(t)?;
    let mut stats = EnumStats::default();
    let committed = if cfg.saturate {
        match saturate_with(&an, &mut stats) {
            Saturation::Saturated(st) => st.committed_msgs,
            Saturation::Inconsistent(_) => return Ok(EnumReport { outcome: Outcome::Inconsistent, stats }),
        }
    } else {
        if let HbResult::Cyclic(_) = an.linearize(&[]) {
            return Ok(EnumReport { outcome: Outcome::Inconsistent, stats });
        }
        BTreeSet::new()
    };
    let mut search = Search {
        an: &an,
        t,
        committed: &committed,
        boxes: an.choice_mailboxes(),
        orders: Vec::new(),
        checks: 0,
        budget: cfg.budget,
        deadline: cfg.timeout.map(|d| Instant::now() + d),
    };
    let single: Vec<(HandlerId, Vec<usize>)> = (0..an.mailboxes.len())
        .filter(|&h| an.mailboxes[h].consumed.len() == 1)
        .map(|h| (h, an.mailboxes[h].consumed.clone()))
        .collect();
    search.orders = single;
    let found = search.mailbox(0);
    stats.checks = search.checks;
    let outcome = match found {
        Step::Found(w) => Outcome::Consistent(w),
        Step::Exhausted => Outcome::Inconsistent,
        Step::OutOfTime => Outcome::Timeout,
    };
    Ok(EnumReport { outcome, stats })
}

enum Step {
    Found(crate::trace::Witness),
    Exhausted,
    OutOfTime,
}

struct Search<'a> {
    an: &'a Analysis,
    t: &'a TraceGraph,
    committed: &'a BTreeSet<(usize, usize)>,
    boxes: Vec<HandlerId>,
    orders: Vec<(HandlerId, Vec<usize>)>,
    checks: u64,
    budget: Option<u64>,
    deadline: Option<Instant>,
}

impl Search<'_> {
    fn out_of_time(&self) -> bool {
        self.budget.is_some_and(|b| self.checks >= b)
            || (self.checks.is_multiple_of(256) && self.deadline.is_some_and(|d| Instant::now() >= d))
    }

    /// Depth-first over mailboxes in handler order; within a mailbox, linear
    /// extensions of the committed order in lexicographic order.
    fn mailbox(&mut self, i: usize) -> Step {
        if i == self.boxes.len() {
            if self.out_of_time() {
                return Step::OutOfTime;
            }
            self.checks += 1;
            return match self.an.witness_for(self.t, &self.orders) {
                Some(w) => Step::Found(w),
                None => Step::Exhausted,
            };
        }
        let h = self.boxes[i];
        let msgs = self.an.mailboxes[h].consumed.clone();
        self.orders.push((h, Vec::with_capacity(msgs.len())));
        let mut used = vec![false; msgs.len()];
        let r = self.extend(i, &msgs, &mut used);
        self.orders.pop();
        r
    }

    fn extend(&mut self, i: usize, msgs: &[usize], used: &mut [bool]) -> Step {
        let depth = self.orders.last().unwrap().1.len();
        if depth == msgs.len() {
            return self.mailbox(i + 1);
        }
        for k in 0..msgs.len() {
            if used[k] {
                continue;
            }
            // Every committed predecessor must already be placed.
            let blocked = (0..msgs.len())
                .any(|j| !used[j] && j != k && self.committed.contains(&(msgs[j], msgs[k])));
            if blocked {
                continue;
            }
            used[k] = true;
            self.orders.last_mut().unwrap().1.push(msgs[k]);
            let r = self.extend(i, msgs, used);
            self.orders.last_mut().unwrap().1.pop();
            used[k] = false;
            match r {
                Step::Exhausted => {}
                other => return other,
            }
        }
        Step::Exhausted
    }
}
