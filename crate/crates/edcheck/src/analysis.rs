//! Preprocessing shared by the checkers: message structure, mailboxes and the
//! static part of happens-before.

use std::collections::BTreeMap;

use crate::trace::{
    derive_messages, sort_or_cycle, total_order, validate, EventId, EventKind, HandlerId, HbResult,
    MessageStructure, Rel, TraceGraph, ValidateOptions, ValidationReport, Witness,
};

#[derive(Clone, Debug, Default)]
pub struct Mailbox {
    /// Messages with a get, in file order of the gets.
    pub consumed: Vec<usize>,
    /// Posts to this handler that were never got.
    pub pending: Vec<EventId>,
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub n: usize,
    pub ms: MessageStructure,
    /// Per message: the post that created it.
    pub post_of: Vec<Option<EventId>>,
    pub mailboxes: Vec<Mailbox>,
    /// po, initial-before-get, rf, co, pb, reduced fr, and
    /// consumed-before-pending posts.
    pub static_edges: Vec<(EventId, EventId)>,
}

impl Analysis {
    /// Validates `t` as a partial trace and computes its static structure.
    pub fn new(t: &TraceGraph) -> Result<Analysis, ValidationReport> {
        let report = validate(t, ValidateOptions::partial());
        if !report.is_ok() {
            return Err(report);
        }
        let ms = derive_messages(t).map_err(|violations| ValidationReport { violations })?;
        let n = t.num_events();
        let mut post_of = vec![None; ms.messages.len()];
        for (p, g) in t.pairs(Rel::Pb) {
            post_of[ms.msg_of[g]] = Some(p);
        }
        let mut mailboxes = vec![Mailbox::default(); t.num_handlers()];
        for (h, mb) in mailboxes.iter_mut().enumerate() {
            mb.consumed = ms.posted[h].clone();
        }
        let consumed_posts: Vec<bool> = {
            let mut v = vec![false; n];
            for (p, _) in t.pairs(Rel::Pb) {
                v[p] = true;
            }
            v
        };
        for (e, ev) in t.events().iter().enumerate() {
            if let EventKind::Post { receiver } = ev.kind {
                if !consumed_posts[e] {
                    mailboxes[receiver].pending.push(e);
                }
            }
        }

        let mut edges: Vec<(EventId, EventId)> = Vec::new();
        for rel in [Rel::Po, Rel::Rf, Rel::Co, Rel::Pb] {
            edges.extend(t.pairs(rel));
        }
        for h in 0..t.num_handlers() {
            if let Some(last) = ms.messages[ms.initial[h]].last() {
                for &m in &ms.posted[h] {
                    edges.push((last, ms.messages[m].get.unwrap()));
                }
            }
        }
        // fr reduced to the immediate coherence successor.
        let co: Vec<(EventId, EventId)> = t.pairs(Rel::Co).collect();
        let mut writes: BTreeMap<&str, Vec<EventId>> = BTreeMap::new();
        for (e, ev) in t.events().iter().enumerate() {
            if let EventKind::Write { var, .. } = &ev.kind {
                writes.entry(var).or_default().push(e);
            }
        }
        let mut co_next = vec![None; n];
        for ws in writes.values() {
            if let Ok(order) = total_order(ws, &co) {
                for w in order.windows(2) {
                    co_next[w[0]] = Some(w[1]);
                }
            }
        }
        for (w, r) in t.pairs(Rel::Rf) {
            if let Some(w2) = co_next[w] {
                edges.push((r, w2));
            }
        }
        for (h, mb) in mailboxes.iter().enumerate() {
            for &m in &ms.posted[h] {
                let p = post_of[m].unwrap();
                for &q in &mb.pending {
                    edges.push((p, q));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Analysis { n, ms, post_of, mailboxes, static_edges: edges })
    }

    pub fn get(&self, m: usize) -> EventId {
        self.ms.messages[m].get.expect("posted message")
    }

    pub fn post(&self, m: usize) -> EventId {
        self.post_of[m].expect("posted message")
    }

    pub fn last(&self, m: usize) -> EventId {
        self.ms.messages[m].last().expect("posted message is non-empty")
    }

    /// Edges implied by executing each mailbox's messages in the given order.
    pub fn order_edges(&self, orders: &[(HandlerId, Vec<usize>)]) -> Vec<(EventId, EventId)> {
        let mut out = Vec::new();
        for (_, order) in orders {
            for w in order.windows(2) {
                out.push((self.post(w[0]), self.post(w[1])));
                out.push((self.last(w[0]), self.get(w[1])));
            }
        }
        out
    }

    /// Acyclicity of the static edges plus `extra`; a linearization on success.
    pub fn linearize(&self, extra: &[(EventId, EventId)]) -> HbResult {
        let mut edges = self.static_edges.clone();
        edges.extend_from_slice(extra);
        sort_or_cycle(self.n, &edges)
    }

    /// Witness for a complete choice of mailbox orders, if it is acyclic.
    pub fn witness_for(&self, t: &TraceGraph, orders: &[(HandlerId, Vec<usize>)]) -> Option<Witness> {
        match self.linearize(&self.order_edges(orders)) {
            HbResult::Acyclic(lin) => Some(Witness::from_linearization(t, lin)),
            HbResult::Cyclic(_) => None,
        }
    }

    /// Handlers with at least two consumed messages, i.e. with a choice.
    pub fn choice_mailboxes(&self) -> Vec<HandlerId> {
        (0..self.mailboxes.len()).filter(|&h| self.mailboxes[h].consumed.len() > 1).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::TraceBuilder;

    #[test]
    fn pending_posts_follow_consumed_ones() {
        let mut b = TraceBuilder::new();
        b.post("p1", "a", "h").post("p2", "b", "h").get("g1", "h").edge(Rel::Pb, "p1", "g1");
        let t = b.build();
        let an = Analysis::new(&t).unwrap();
        let h = t.handler_id("h").unwrap();
        assert_eq!(an.mailboxes[h].pending, vec![t.event_id("p2").unwrap()]);
        assert!(an.static_edges.contains(&(t.event_id("p1").unwrap(), t.event_id("p2").unwrap())));
    }

    #[test]
    fn fr_is_reduced() {
        let mut b = TraceBuilder::new();
        b.write("w1", "h", "x", 1).write("w2", "h", "x", 2).write("w3", "h", "x", 3);
        b.read("r", "g", "x").po_chain(&["w1", "w2", "w3"]).chain(Rel::Co, &["w1", "w2", "w3"]);
        b.edge(Rel::Rf, "w1", "r");
        let t = b.build();
        let an = Analysis::new(&t).unwrap();
        let id = |s| t.event_id(s).unwrap();
        assert!(an.static_edges.contains(&(id("r"), id("w2"))));
        assert!(!an.static_edges.contains(&(id("r"), id("w3"))));
    }
}
