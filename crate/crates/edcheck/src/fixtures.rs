//! Hand-built traces: a name-based builder plus the fixture families used by
//! tests, examples and benchmarks.

use crate::trace::{EventKind, Rel, TraceGraph};

/// Builds traces by name. Handlers are created on first mention, events in
/// call order. Panics on malformed input; intended for fixtures.
#[derive(Clone, Debug, Default)]
pub struct TraceBuilder {
    t: TraceGraph,
}

impl TraceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn handler(&mut self, name: &str) -> &mut Self {
        self.h(name);
        self
    }

    fn h(&mut self, name: &str) -> usize {
        match self.t.handler_id(name) {
            Some(h) => h,
            None => self.t.add_handler(name).unwrap(),
        }
    }

    fn ev(&mut self, id: &str, handler: &str, kind: EventKind) -> &mut Self {
        let h = self.h(handler);
        self.t.add_event(id, h, kind).unwrap_or_else(|e| panic!("{e}"));
        self
    }

    pub fn write(&mut self, id: &str, handler: &str, var: &str, val: i64) -> &mut Self {
        self.ev(id, handler, EventKind::Write { var: var.into(), val })
    }

    pub fn read(&mut self, id: &str, handler: &str, var: &str) -> &mut Self {
        self.ev(id, handler, EventKind::Read { var: var.into() })
    }

    pub fn post(&mut self, id: &str, handler: &str, receiver: &str) -> &mut Self {
        let r = self.h(receiver);
        self.ev(id, handler, EventKind::Post { receiver: r })
    }

    pub fn get(&mut self, id: &str, handler: &str) -> &mut Self {
        self.ev(id, handler, EventKind::Get)
    }

    pub fn edge(&mut self, rel: Rel, src: &str, dst: &str) -> &mut Self {
        let id = |s: &str| self.t.event_id(s).unwrap_or_else(|| panic!("unknown event {s}"));
        let (a, b) = (id(src), id(dst));
        self.t.add_edge(rel, a, b);
        self
    }

    pub fn po_chain(&mut self, ids: &[&str]) -> &mut Self {
        self.chain(Rel::Po, ids)
    }

    pub fn chain(&mut self, rel: Rel, ids: &[&str]) -> &mut Self {
        for w in ids.windows(2) {
            self.edge(rel, w[0], w[1]);
        }
        self
    }

    /// A write and a read of a fresh variable, linked by rf.
    pub fn flag(&mut self, w: &str, wh: &str, r: &str, rh: &str, var: &str) -> &mut Self {
        self.write(w, wh, var, 1).read(r, rh, var).edge(Rel::Rf, w, r)
    }

    pub fn build(&self) -> TraceGraph {
        self.t.clone()
    }
}

/// Message sorting through nested posts.
///
/// `h0` posts three wrappers to `h1`. Wrapper 1 hops `h1 → h2 → h3 → h1`,
/// wrappers 2 and 3 hop `h1 → h3 → h2 → h1`, and each path finally delivers
/// an inner message `m_i` to `h1`. `order` lists the inner messages (1-based)
/// in the order `h1` must execute them; rf pairs between consecutive inner
/// messages enforce it. Consistent iff `m2` comes before `m3`.
pub fn sorting_trace(order: [usize; 3]) -> TraceGraph {
    let mut b = TraceBuilder::new();
    for h in ["h0", "h1", "h2", "h3"] {
        b.handler(h);
    }
    let init: Vec<String> = (1..=3).map(|i| format!("w{i}_post")).collect();
    for p in &init {
        b.post(p, "h0", "h1");
    }
    b.po_chain(&init.iter().map(String::as_str).collect::<Vec<_>>());
    for i in 1..=3 {
        let route = if i == 1 { ["h1", "h2", "h3"] } else { ["h1", "h3", "h2"] };
        let mut prev = format!("w{i}_post");
        for (hop, h) in route.iter().enumerate() {
            let next = route.get(hop + 1).copied().unwrap_or("h1");
            let g = format!("w{i}_hop{hop}_get");
            let p = format!("w{i}_hop{hop}_post");
            b.get(&g, h).post(&p, h, next).edge(Rel::Pb, &prev, &g).edge(Rel::Po, &g, &p);
            prev = p;
        }
        b.get(&format!("m{i}_get"), "h1").edge(Rel::Pb, &prev, &format!("m{i}_get"));
    }
    // Each inner message reads its predecessor's flag, then writes its own.
    let mut body: Vec<Vec<String>> = (0..=3).map(|i| vec![format!("m{i}_get")]).collect();
    for w in order.windows(2) {
        let (a, c) = (w[0], w[1]);
        let (wr, rd) = (format!("m{a}_w{c}"), format!("m{c}_r{a}"));
        b.flag(&wr, "h1", &rd, "h1", &format!("o{a}{c}"));
        body[c].insert(1, rd);
        body[a].push(wr);
    }
    for evs in &body[1..] {
        b.po_chain(&evs.iter().map(String::as_str).collect::<Vec<_>>());
    }
    b.build()
}

/// All six inner orders with the expected verdict.
pub fn sorting_orders() -> Vec<([usize; 3], bool)> {
    let perms = [[1, 2, 3], [1, 3, 2], [2, 1, 3], [2, 3, 1], [3, 1, 2], [3, 2, 1]];
    perms
        .into_iter()
        .map(|o| {
            let p2 = o.iter().position(|&x| x == 2).unwrap();
            let p3 = o.iter().position(|&x| x == 3).unwrap();
            (o, p2 < p3)
        })
        .collect()
}

/// A family on which mailbox enumeration blows up while the instance is
/// small for a solver.
///
/// Three boolean choices (the order of two messages on `Wa`, `Wb`, `Wc`)
/// feed eight clause gadgets, one per sign pattern, so every choice closes a
/// cycle. Three padding mailboxes with `pad` unconstrained messages each
/// multiply the enumeration space by `(pad!)^3`.
pub fn enum_blowup_trace(pad: usize) -> TraceGraph {
    let mut b = TraceBuilder::new();
    let srcs = pad.max(2);
    let vars = ["a", "b", "c"];
    // Source k posts message k to every mailbox that has one.
    for k in 0..srcs {
        let s = format!("src{k}");
        let mut chain = Vec::new();
        for v in vars {
            if k < 2 {
                let p = format!("{v}{k}_post");
                b.post(&p, &s, &format!("W{v}"));
                chain.push(p);
            }
        }
        for q in 0..3 {
            if k < pad {
                let p = format!("pad{q}_{k}_post");
                b.post(&p, &s, &format!("P{q}"));
                chain.push(p);
            }
        }
        let refs: Vec<&str> = chain.iter().map(String::as_str).collect();
        b.po_chain(&refs);
    }
    // Padding messages: a get and one private write.
    for q in 0..3 {
        for k in 0..pad {
            let g = format!("pad{q}_{k}_get");
            let w = format!("pad{q}_{k}_w");
            b.get(&g, &format!("P{q}")).write(&w, &format!("P{q}"), &w, 1);
            b.edge(Rel::Pb, &format!("pad{q}_{k}_post"), &g).edge(Rel::Po, &g, &w);
        }
    }
    // Choice messages host one sandwich slot per clause:
    // [get, W f1_0 .. W f1_7, R f2_0 .. R f2_7].
    for v in vars {
        for k in 0..2 {
            let g = format!("{v}{k}_get");
            b.get(&g, &format!("W{v}")).edge(Rel::Pb, &format!("{v}{k}_post"), &g);
            let mut body = vec![g];
            for c in 0..8 {
                let w = format!("{v}{k}_c{c}_w");
                b.write(&w, &format!("W{v}"), &w, 1);
                body.push(w);
            }
            for c in 0..8 {
                let r = format!("{v}{k}_c{c}_r");
                b.read(&r, &format!("W{v}"), &r);
                body.push(r);
            }
            let refs: Vec<&str> = body.iter().map(String::as_str).collect();
            b.po_chain(&refs);
        }
    }
    // Clause c: literal v is positive iff bit v of c is set. Literal true
    // iff its complement message runs first, so the literal message is `x1`
    // for a positive literal and `x0` for a negative one.
    for c in 0..8usize {
        let hs: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| format!("cl{c}_{s}")).collect();
        let mut boxes: Vec<(String, String)> = Vec::new();
        for (i, v) in vars.iter().enumerate() {
            let pos = (c >> i) & 1 == 1;
            let (lit, comp) = if pos { (1, 0) } else { (0, 1) };
            boxes.push((format!("{v}{lit}"), format!("{v}{comp}")));
        }
        let z = format!("cl{c}_z");
        b.read(&format!("{z}_r"), &hs[0], &z);
        let mut lanes: Vec<Vec<String>> = vec![vec![format!("{z}_r")], vec![], vec![], vec![]];
        for (i, (lit, comp)) in boxes.iter().enumerate() {
            for (lane, msg) in [(i, lit), (i + 1, comp)] {
                let h = &hs[lane];
                let (br, bw) = (format!("cl{c}_{msg}_br"), format!("cl{c}_{msg}_bw"));
                let (f1, f2) = (format!("{msg}_c{c}_w"), format!("{msg}_c{c}_r"));
                b.read(&br, h, &f1).write(&bw, h, &f2, 1);
                b.edge(Rel::Rf, &f1, &br).edge(Rel::Rf, &bw, &f2);
                lanes[lane].push(br);
                lanes[lane].push(bw);
            }
        }
        b.write(&format!("{z}_w"), &hs[3], &z, 1);
        lanes[3].push(format!("{z}_w"));
        b.edge(Rel::Rf, &format!("{z}_w"), &format!("{z}_r"));
        for lane in &lanes {
            let refs: Vec<&str> = lane.iter().map(String::as_str).collect();
            b.po_chain(&refs);
        }
    }
    b.build()
}

/// A no-nesting token ring with exactly `n` events (`n ≥ 16`).
///
/// `h0` posts round `k` to `h1` and `h2` from its initial message; the
/// round-`k` messages pass a token `h1 → h2 → h1 …` and record `done1`, and
/// `h0` posts round `k+1` only after reading `done1` of round `k`.
pub fn ring_trace(n: usize) -> TraceGraph {
    assert!(n >= 16, "ring needs at least 16 events");
    let rounds = (n + 1) / 11;
    let mut b = TraceBuilder::new();
    for h in ["h0", "h1", "h2"] {
        b.handler(h);
    }
    let mut init: Vec<String> = Vec::new();
    b.write("tok_init", "h0", "tok", 0);
    init.push("tok_init".into());
    for k in 1..=rounds {
        if k > 1 {
            let r = format!("h0_sees_{k}");
            b.read(&r, "h0", "done1");
            init.push(r);
        }
        for j in 1..=2 {
            let p = format!("h0_post{j}_{k}");
            b.post(&p, "h0", &format!("h{j}"));
            init.push(p);
        }
    }
    let mut tok_writes = vec!["tok_init".to_string()];
    for k in 1..=rounds {
        for j in 1..=2 {
            let h = format!("h{j}");
            let (g, r, w, d) = (
                format!("h{j}_get_{k}"),
                format!("h{j}_tok_r_{k}"),
                format!("h{j}_tok_w_{k}"),
                format!("h{j}_done_{k}"),
            );
            b.get(&g, &h).read(&r, &h, "tok");
            b.write(&w, &h, "tok", (2 * (k - 1) + j) as i64);
            b.write(&d, &h, &format!("done{j}"), k as i64);
            b.po_chain(&[&g, &r, &w, &d]).edge(Rel::Pb, &format!("h0_post{j}_{k}"), &g);
            b.edge(Rel::Rf, tok_writes.last().unwrap(), &r);
            tok_writes.push(w);
            if k > 1 {
                b.edge(Rel::Co, &format!("h{j}_done_{}", k - 1), &d);
            }
        }
        if k < rounds {
            b.edge(Rel::Rf, &format!("h1_done_{k}"), &format!("h0_sees_{}", k + 1));
        }
    }
    b.chain(Rel::Co, &tok_writes.iter().map(String::as_str).collect::<Vec<_>>());
    let have = b.build().num_events();
    for p in 0..n.saturating_sub(have) {
        let w = format!("pad{p}");
        b.write(&w, "h0", &w, 0);
        init.push(w);
    }
    b.po_chain(&init.iter().map(String::as_str).collect::<Vec<_>>());
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{derive_messages, validate, ValidateOptions};

    #[test]
    fn sorting_traces_are_well_formed() {
        for (o, _) in sorting_orders() {
            let t = sorting_trace(o);
            let r = validate(&t, ValidateOptions::partial());
            assert!(r.is_ok(), "{o:?}: {r}");
        }
    }

    #[test]
    fn blowup_trace_is_well_formed() {
        let t = enum_blowup_trace(8);
        let r = validate(&t, ValidateOptions::partial());
        assert!(r.is_ok(), "{r}");
        let ms = derive_messages(&t).unwrap();
        for q in 0..3 {
            let h = t.handler_id(&format!("P{q}")).unwrap();
            assert_eq!(ms.posted[h].len(), 8);
        }
    }

    #[test]
    fn ring_has_exact_size() {
        for n in [20, 40, 80, 160] {
            let t = ring_trace(n);
            assert_eq!(t.num_events(), n);
            assert_eq!(t.num_handlers(), 3);
            let r = validate(&t, ValidateOptions::partial());
            assert!(r.is_ok(), "{n}: {r}");
        }
    }
}
