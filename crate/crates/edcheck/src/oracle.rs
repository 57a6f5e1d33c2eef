//! Brute force, the reference the other checkers are tested against.

use std::collections::BTreeMap;

use crate::trace::{
    effective_po, hb_acyclic, validate, EventId, EventKind, HbResult, Pairs, Rel, TraceGraph,
    ValidateOptions, ValidationReport, Violation, Witness,
};

#[derive(Clone, Debug)]
pub struct OracleConfig {
    /// Enumerate execution orders independently of mailbox orders.
    pub strict_eo: bool,
    /// Enumerate coherence for variables without any co edge.
    pub infer_co: bool,
    pub all_witnesses: bool,
    pub max_events: usize,
    pub max_candidates: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            strict_eo: false,
            infer_co: false,
            all_witnesses: false,
            max_events: 64,
            max_candidates: 5_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleResult {
    /// First witness, or all of them in lexicographic order of the mailbox
    /// orders.
    Consistent(Vec<Witness>),
    Inconsistent,
    Refused(String),
}

impl OracleResult {
    pub fn verdict(&self) -> Option<bool> {
        match self {
            OracleResult::Consistent(_) => Some(true),
            OracleResult::Inconsistent => Some(false),
            OracleResult::Refused(_) => None,
        }
    }
}

/// Dimensions of the search, each a sequence of events to order.
struct Dim {
    rel: Rel,
    items: Vec<EventId>,
    /// `must[j]`: indices that precede `j` in program order.
    must: Vec<Vec<usize>>,
}

impl Dim {
    fn new(rel: Rel, items: Vec<EventId>, po: &Pairs) -> Dim {
        let must = items
            .iter()
            .map(|&b| (0..items.len()).filter(|&i| po.contains(&(items[i], b))).collect())
            .collect();
        Dim { rel, items, must }
    }

    /// Orders that respect program order; any other order closes a cycle
    /// with po. `None` past 25 items.
    fn count(&self) -> Option<f64> {
        let n = self.items.len();
        if n > 25 {
            return None;
        }
        let need: Vec<u32> = self.must.iter().map(|m| m.iter().fold(0, |a, &i| a | 1 << i)).collect();
        let mut ways = vec![0f64; 1 << n];
        ways[0] = 1.0;
        for set in 0..(1usize << n) {
            if ways[set] == 0.0 {
                continue;
            }
            for j in 0..n {
                if set >> j & 1 == 0 && need[j] as usize & !set == 0 {
                    ways[set | 1 << j] += ways[set];
                }
            }
        }
        Some(ways[(1 << n) - 1])
    }

    /// All such orders, lexicographically.
    fn orders(&self) -> Vec<Vec<usize>> {
        fn go(d: &Dim, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == d.items.len() {
                out.push(cur.clone());
                return;
            }
            for j in 0..d.items.len() {
                if !used[j] && d.must[j].iter().all(|&i| used[i]) {
                    used[j] = true;
                    cur.push(j);
                    go(d, cur, used, out);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut vec![false; self.items.len()], &mut out);
        out
    }
}

/// Tries every mailbox order per receiver (and, optionally, every execution
/// order and coherence order), builds the full trace and tests it directly.
/// Orders that contradict program order between events of one handler are
/// skipped.
pub fn check_oracle(t: &TraceGraph, cfg: &OracleConfig) -> Result<OracleResult, ValidationReport> {
    let base = t.clone();
    let report = validate(t, ValidateOptions::partial());
    let po = if report.violations.iter().any(|v| matches!(v, Violation::DanglingEdge { .. })) {
        Pairs::new()
    } else {
        effective_po(t)
    };
    let mut dims: Vec<Dim> = Vec::new();
    for h in 0..t.num_handlers() {
        let posts: Vec<EventId> = (0..t.num_events())
            .filter(|&e| matches!(t.event(e).kind, EventKind::Post { receiver } if receiver == h))
            .collect();
        dims.push(Dim::new(Rel::Mo, posts, &po));
    }
    if cfg.strict_eo {
        for h in 0..t.num_handlers() {
            let gets: Vec<EventId> = t.events_of(h).filter(|&e| t.event(e).kind.is_get()).collect();
            dims.push(Dim::new(Rel::Eo, gets, &po));
        }
    }
    if cfg.infer_co {
        let mut writes: BTreeMap<&str, Vec<EventId>> = BTreeMap::new();
        for (e, ev) in t.events().iter().enumerate() {
            if let EventKind::Write { var, .. } = &ev.kind {
                writes.entry(var).or_default().push(e);
            }
        }
        let has_co: Vec<bool> = {
            let mut v = vec![false; t.num_events()];
            for (a, b) in t.pairs(Rel::Co) {
                v[a] = true;
                v[b] = true;
            }
            v
        };
        for ws in writes.into_values() {
            if ws.iter().all(|&w| !has_co[w]) {
                dims.push(Dim::new(Rel::Co, ws, &po));
            }
        }
    }

    // Structural problems are reported as such, not as a verdict.
    let mut probe = base.clone();
    for d in &dims {
        if d.rel == Rel::Co {
            for w in d.items.windows(2) {
                probe.add_edge(Rel::Co, w[0], w[1]);
            }
        }
    }
    let report = validate(&probe, ValidateOptions::partial());
    if !report.is_ok() {
        return Err(report);
    }

    if t.num_events() > cfg.max_events {
        return Ok(OracleResult::Refused(format!(
            "{} events exceed the limit of {}",
            t.num_events(),
            cfg.max_events
        )));
    }
    let predicted: Option<f64> = dims.iter().map(Dim::count).product();
    match predicted {
        Some(p) if p <= cfg.max_candidates as f64 => {}
        p => {
            return Ok(OracleResult::Refused(format!(
                "{} candidate assignments exceed the limit of {}",
                p.map_or("too many".into(), |p| format!("{p:.3e}")),
                cfg.max_candidates
            )))
        }
    }
    let choices: Vec<Vec<Vec<usize>>> = dims.iter().map(Dim::orders).collect();

    let get_of: BTreeMap<EventId, EventId> = t.pairs(Rel::Pb).collect();
    let mut pick = vec![0usize; dims.len()];
    let mut found = Vec::new();
    loop {
        let mut full = base.clone();
        for (k, d) in dims.iter().enumerate() {
            let seq: Vec<EventId> = choices[k][pick[k]].iter().map(|&i| d.items[i]).collect();
            for w in seq.windows(2) {
                full.add_edge(d.rel, w[0], w[1]);
            }
            if d.rel == Rel::Mo && !cfg.strict_eo {
                let gets: Vec<EventId> = seq.iter().filter_map(|p| get_of.get(p).copied()).collect();
                for w in gets.windows(2) {
                    full.add_edge(Rel::Eo, w[0], w[1]);
                }
            }
        }
        if validate(&full, ValidateOptions::full()).is_ok() {
            if let HbResult::Acyclic(lin) = hb_acyclic(&full) {
                found.push(Witness::from_linearization(t, lin));
                if !cfg.all_witnesses {
                    break;
                }
            }
        }
        // Odometer: the last dimension varies fastest.
        let mut k = pick.len();
        let advanced = loop {
            if k == 0 {
                break false;
            }
            k -= 1;
            pick[k] += 1;
            if pick[k] < choices[k].len() {
                break true;
            }
            pick[k] = 0;
        };
        if !advanced {
            break;
        }
    }
    Ok(if found.is_empty() { OracleResult::Inconsistent } else { OracleResult::Consistent(found) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{sorting_trace, TraceBuilder};

    #[test]
    fn empty_trace() {
        let r = check_oracle(&TraceGraph::new(), &OracleConfig::default()).unwrap();
        assert_eq!(r, OracleResult::Consistent(vec![Witness::default()]));
    }

    #[test]
    fn forbidden_sorting_order() {
        let r = check_oracle(&sorting_trace([3, 2, 1]), &OracleConfig::default()).unwrap();
        assert_eq!(r, OracleResult::Inconsistent);
    }

    #[test]
    fn strict_eo_agrees_on_two_sources() {
        let mut b = TraceBuilder::new();
        b.post("p1", "s1", "h").post("p2", "s2", "h").get("g1", "h").get("g2", "h");
        b.edge(Rel::Pb, "p1", "g1").edge(Rel::Pb, "p2", "g2");
        let t = b.build();
        let fifo = check_oracle(&t, &OracleConfig { all_witnesses: true, ..Default::default() }).unwrap();
        let strict = check_oracle(
            &t,
            &OracleConfig { all_witnesses: true, strict_eo: true, ..Default::default() },
        )
        .unwrap();
        assert_eq!(fifo.verdict(), strict.verdict());
        // FIFO admits both mailbox orders; strict mode finds no others.
        let (OracleResult::Consistent(a), OracleResult::Consistent(b)) = (fifo, strict) else { panic!() };
        assert_eq!(a.len(), 2);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn infer_co_fills_missing_coherence() {
        let mut b = TraceBuilder::new();
        b.write("w1", "h", "x", 1).write("w2", "g", "x", 2);
        let t = b.build();
        assert!(check_oracle(&t, &OracleConfig::default()).is_err());
        let cfg = OracleConfig { infer_co: true, all_witnesses: true, ..Default::default() };
        let OracleResult::Consistent(ws) = check_oracle(&t, &cfg).unwrap() else { panic!() };
        assert_eq!(ws.len(), 2);
    }

    #[test]
    fn limits_refuse() {
        let cfg = OracleConfig { max_candidates: 5, ..Default::default() };
        let r = check_oracle(&sorting_trace([1, 2, 3]), &cfg).unwrap();
        assert!(matches!(r, OracleResult::Refused(_)));
    }

    #[test]
    fn orders_respect_program_order() {
        // Three posts to h from one message: only one mailbox order is tried.
        let mut b = TraceBuilder::new();
        b.post("p1", "a", "h").post("p2", "a", "h").post("p3", "b", "h").po_chain(&["p1", "p2"]);
        let t = b.build();
        let d = Dim::new(Rel::Mo, vec![0, 1, 2], &effective_po(&t));
        assert_eq!(d.count(), Some(3.0));
        assert_eq!(d.orders(), vec![vec![0, 1, 2], vec![0, 2, 1], vec![2, 0, 1]]);
        let cfg = OracleConfig { all_witnesses: true, ..Default::default() };
        let OracleResult::Consistent(ws) = check_oracle(&t, &cfg).unwrap() else { panic!() };
        assert_eq!(ws.len(), 3);
    }
}
