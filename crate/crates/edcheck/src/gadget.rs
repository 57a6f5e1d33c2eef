//! The NP-hardness construction: a 3-BI-3SAT formula becomes a partial trace
//! on twelve handlers that is consistent iff the formula is satisfiable.
//!
//! Stage 1 moves one token per literal row through a variable × clause grid.
//! Each column costs every row two passes through `h_V`; at a marked cell the
//! second pass detours through `h_t{v}` (and, for the complemented first
//! occurrence, first through `h_t{v+3}`), which posts the occurrence message
//! `m_{i,j,b}` to `h_W`. The pair `m_{i,j,0}`, `m_{i,j,1}` reaches `h_W` in the
//! order the two rows reach `h_t{v}`, which is free at a variable's first
//! occurrence and inherited afterwards. `x_i` is true iff `m_{i,j,0}` runs
//! first.
//!
//! Stage 2 hangs one box `[R, W]` per literal form inside each `h_W` message
//! (rf in and out of the message) and chains the boxes of a clause across
//! `h_Ca..h_Cd` so that all literals false closes a cycle through `z_j`.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::trace::{EventId, EventKind, Rel, TraceGraph};

/// A literal: 1-based variable and polarity (`true` = positive).
pub type Lit = (usize, bool);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cnf3BI {
    pub n: usize,
    pub clauses: Vec<Vec<Lit>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnfError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("clause {clause}: {msg}")]
    Clause { clause: usize, msg: String },
    #[error("variable {var} occurs in {count} clauses (at most 3 allowed)")]
    TooManyOccurrences { var: usize, count: usize },
}

impl Cnf3BI {
    /// Checks the 3-BI-3SAT restrictions.
    pub fn new(n: usize, clauses: Vec<Vec<Lit>>) -> Result<Cnf3BI, CnfError> {
        let mut count = vec![0usize; n + 1];
        for (c, cl) in clauses.iter().enumerate() {
            let clause = c + 1;
            if !(2..=3).contains(&cl.len()) {
                return Err(CnfError::Clause {
                    clause,
                    msg: format!("has {} literals; each clause needs two or three", cl.len()),
                });
            }
            for (k, &(v, _)) in cl.iter().enumerate() {
                if v == 0 || v > n {
                    return Err(CnfError::Clause { clause, msg: format!("variable {v} out of range 1..={n}") });
                }
                if cl[..k].iter().any(|&(w, _)| w == v) {
                    return Err(CnfError::Clause {
                        clause,
                        msg: format!("variable {v} repeated; each variable appears at most once per clause"),
                    });
                }
                count[v] += 1;
            }
        }
        if let Some(var) = (1..=n).find(|&v| count[v] > 3) {
            return Err(CnfError::TooManyOccurrences { var, count: count[var] });
        }
        Ok(Cnf3BI { n, clauses })
    }

    pub fn satisfied_by(&self, a: &[bool]) -> bool {
        self.clauses.iter().all(|cl| cl.iter().any(|&(v, pos)| a[v - 1] == pos))
    }
}

impl fmt::Display for Cnf3BI {
    /// DIMACS.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p cnf {} {}", self.n, self.clauses.len())?;
        for cl in &self.clauses {
            for &(v, pos) in cl {
                write!(f, "{}{v} ", if pos { "" } else { "-" })?;
            }
            writeln!(f, "0")?;
        }
        Ok(())
    }
}

/// DIMACS CNF restricted to 3-BI-3SAT.
pub fn parse_dimacs_restricted(src: &str) -> Result<Cnf3BI, CnfError> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut cur: Vec<Lit> = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('c') || l.starts_with('%') {
            continue;
        }
        if l.starts_with('p') {
            let f: Vec<&str> = l.split_whitespace().collect();
            if header.is_some() || f.len() != 4 || f[1] != "cnf" {
                return Err(CnfError::Syntax { line, msg: "expected a single 'p cnf <vars> <clauses>'".into() });
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| CnfError::Syntax { line, msg: format!("bad count '{s}'") });
            header = Some((num(f[2])?, num(f[3])?, line));
            continue;
        }
        if header.is_none() {
            return Err(CnfError::Syntax { line, msg: "clause before the 'p cnf' header".into() });
        }
        for tok in l.split_whitespace() {
            let x: i64 = tok.parse().map_err(|_| CnfError::Syntax { line, msg: format!("bad literal '{tok}'") })?;
            if x == 0 {
                clauses.push(std::mem::take(&mut cur));
            } else {
                cur.push((x.unsigned_abs() as usize, x > 0));
            }
        }
    }
    let Some((n, m, header_line)) = header else {
        return Err(CnfError::Syntax { line: 1, msg: "missing 'p cnf' header".into() });
    };
    if !cur.is_empty() {
        return Err(CnfError::Syntax { line: src.lines().count(), msg: "last clause is not terminated by 0".into() });
    }
    if clauses.len() != m {
        return Err(CnfError::Syntax {
            line: header_line,
            msg: format!("header announces {m} clauses, found {}", clauses.len()),
        });
    }
    Cnf3BI::new(n, clauses)
}

/// A random formula with `n` variables and `m` clauses, or `None` when the
/// occurrence bound leaves too few variables for some clause.
pub fn random_cnf<R: rand::Rng>(rng: &mut R, n: usize, m: usize) -> Option<Cnf3BI> {
    use rand::seq::IndexedRandom;
    let mut count = vec![0usize; n + 1];
    let mut clauses = Vec::with_capacity(m);
    for _ in 0..m {
        let free: Vec<usize> = (1..=n).filter(|&v| count[v] < 3).collect();
        if free.len() < 2 {
            return None;
        }
        let k = if free.len() >= 3 && rng.random_bool(0.5) { 3 } else { 2 };
        let vars: Vec<usize> = free.choose_multiple(rng, k).copied().collect();
        for &v in &vars {
            count[v] += 1;
        }
        clauses.push(vars.into_iter().map(|v| (v, rng.random_bool(0.5))).collect());
    }
    Cnf3BI::new(n, clauses).ok()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    Sat(Vec<bool>),
    Unsat,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{0} variables exceed the brute-force limit of 24")]
pub struct TooLarge(pub usize);

/// Scans assignments in binary order; the first satisfying one wins.
pub fn sat_bruteforce(f: &Cnf3BI) -> Result<SatResult, TooLarge> {
    if f.n > 24 {
        return Err(TooLarge(f.n));
    }
    let mut a = vec![false; f.n];
    for mask in 0u32..(1 << f.n) {
        for (v, x) in a.iter_mut().enumerate() {
            *x = mask >> v & 1 == 1;
        }
        if f.satisfied_by(&a) {
            return Ok(SatResult::Sat(a));
        }
    }
    Ok(SatResult::Unsat)
}

/// Same question, assignments visited in Gray-code order.
pub fn sat_bruteforce_gray(f: &Cnf3BI) -> Result<SatResult, TooLarge> {
    if f.n > 24 {
        return Err(TooLarge(f.n));
    }
    let mut a = vec![false; f.n];
    for k in 0u32..(1 << f.n) {
        if k > 0 {
            a[k.trailing_zeros() as usize] ^= true;
        }
        if f.satisfied_by(&a) {
            return Ok(SatResult::Sat(a));
        }
    }
    Ok(SatResult::Unsat)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "role")]
pub enum Role {
    /// Row `row` (0-based; `2(i-1)` for `x_i`, `2(i-1)+1` for its negation),
    /// clause column `col` (1-based; 0 for the initial posts), message `seg`
    /// within the cell.
    PostSeqCell { row: usize, col: usize, seg: usize },
    MessageInsertion { var: usize, clause: usize, bit: u8 },
    Sandwich { var: usize, clause: usize, bit: u8 },
    /// Position 1..=14 in the clause gadget.
    ClauseGadget { clause: usize, pos: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub stage: u8,
    #[serde(flatten)]
    pub role: Role,
}

#[derive(Clone, Debug)]
pub struct GadgetTrace {
    /// Variables of the source formula.
    pub n: usize,
    pub trace: TraceGraph,
    pub provenance: BTreeMap<String, Provenance>,
}

impl GadgetTrace {
    pub fn provenance_json(&self) -> String {
        serde_json::to_string_pretty(&self.provenance).expect("serializable") + "\n"
    }
}

pub const HANDLERS: [&str; 12] =
    ["h_V", "h_t1", "h_t2", "h_t3", "h_t4", "h_t5", "h_t6", "h_W", "h_Ca", "h_Cb", "h_Cc", "h_Cd"];

struct Builder {
    t: TraceGraph,
    prov: BTreeMap<String, Provenance>,
}

impl Builder {
    fn h(&self, name: &str) -> usize {
        self.t.handler_id(name).expect("fixed handler set")
    }

    fn ev(&mut self, id: String, h: &str, kind: EventKind, stage: u8, role: Role) -> EventId {
        let h = self.h(h);
        let e = self.t.add_event(&id, h, kind).expect("ids are unique");
        self.prov.insert(id, Provenance { stage, role });
        e
    }

    fn post(&mut self, id: String, h: &str, to: &str, stage: u8, role: Role) -> EventId {
        let receiver = self.h(to);
        self.ev(id, h, EventKind::Post { receiver }, stage, role)
    }

    fn chain(&mut self, evs: &[EventId]) {
        for w in evs.windows(2) {
            self.t.add_edge(Rel::Po, w[0], w[1]);
        }
    }
}

fn form_var(i: usize, j: usize, positive: bool, k: u8) -> String {
    format!("{}_x{i}_c{j}_{k}", if positive { "l" } else { "lbar" })
}

pub fn build_gadget(f: &Cnf3BI) -> GadgetTrace {
    let mut b = Builder { t: TraceGraph::new(), prov: BTreeMap::new() };
    for h in HANDLERS {
        b.t.add_handler(h).expect("distinct");
    }
    let m = f.clauses.len();
    // occ[i][j] = (u, v, positive) for x_{i+1} in clause j+1.
    let mut occ: Vec<BTreeMap<usize, (usize, usize, bool)>> = vec![BTreeMap::new(); f.n];
    for (j, cl) in f.clauses.iter().enumerate() {
        for (v, &(i, pos)) in cl.iter().enumerate() {
            let u = occ[i - 1].len() + 1;
            occ[i - 1].insert(j, (u, v + 1, pos));
        }
    }

    // Stage 1. `open` holds, per row, the post that starts its next column.
    let rows = 2 * f.n;
    let mut init = Vec::new();
    let mut open = Vec::with_capacity(rows);
    for r in 0..rows {
        let p = b.post(
            format!("s1_cell_r{r}_c0_s0_post"),
            "h_V",
            "h_V",
            1,
            Role::PostSeqCell { row: r, col: 0, seg: 0 },
        );
        init.push(p);
        open.push(p);
    }
    b.chain(&init);
    // An h_W message per occurrence, filled in by Stage 2: (get, write, read).
    let mut hw: BTreeMap<(usize, usize, u8), (EventId, EventId, EventId)> = BTreeMap::new();
    for c in 1..=m {
        let j = c - 1;
        let last_col = c == m;
        for r in 0..rows {
            let (i, row_pos) = (r / 2 + 1, r % 2 == 0);
            let cell = |seg: usize| Role::PostSeqCell { row: r, col: c, seg };
            let id = |seg: usize, what: &str| format!("s1_cell_r{r}_c{c}_s{seg}_{what}");
            // Handlers visited by the cell's messages, the last one ending the
            // column; each message is [get, post to the next handler].
            let route: Vec<String> = match occ[i - 1].get(&j) {
                None => vec!["h_V".into(), "h_V".into()],
                Some(&(u, v, pos)) => {
                    let barred = pos != row_pos;
                    if u == 1 && barred {
                        vec!["h_V".into(), format!("h_t{}", v + 3), format!("h_t{v}")]
                    } else {
                        vec!["h_V".into(), "h_V".into(), format!("h_t{v}")]
                    }
                }
            };
            let mut prev = open[r];
            for (seg, h) in route.iter().enumerate() {
                let g = b.ev(id(seg + 1, "get"), h, EventKind::Get, 1, cell(seg + 1));
                b.t.add_edge(Rel::Pb, prev, g);
                let mut evs = vec![g];
                let final_msg = seg + 1 == route.len();
                if final_msg && occ[i - 1].contains_key(&j) {
                    let bit = u8::from(row_pos);
                    let role = Role::MessageInsertion { var: i, clause: c, bit };
                    let p = b.post(format!("s1_ins_x{i}_c{c}_b{bit}_post"), h, "h_W", 1, role.clone());
                    let mg = b.ev(format!("s1_ins_x{i}_c{c}_b{bit}_get"), "h_W", EventKind::Get, 1, role);
                    b.t.add_edge(Rel::Pb, p, mg);
                    evs.push(p);
                    let sw = Role::Sandwich { var: i, clause: c, bit };
                    let w = b.ev(
                        format!("s2_sw_x{i}_c{c}_b{bit}_w"),
                        "h_W",
                        EventKind::Write { var: form_var(i, c, row_pos, 1), val: 1 },
                        2,
                        sw.clone(),
                    );
                    let rd = b.ev(
                        format!("s2_sw_x{i}_c{c}_b{bit}_r"),
                        "h_W",
                        EventKind::Read { var: form_var(i, c, row_pos, 2) },
                        2,
                        sw,
                    );
                    b.chain(&[mg, w, rd]);
                    hw.insert((i, c, bit), (mg, w, rd));
                }
                if !(final_msg && last_col) {
                    let next = route.get(seg + 1).map(String::as_str).unwrap_or("h_V");
                    let p = b.post(id(seg + 1, "post"), h, next, 1, cell(seg + 1));
                    evs.push(p);
                    prev = p;
                }
                b.chain(&evs);
            }
            open[r] = prev;
        }
    }

    // Stage 2.
    let mut lanes: BTreeMap<&str, Vec<EventId>> = BTreeMap::new();
    for (j, cl) in f.clauses.iter().enumerate() {
        let c = j + 1;
        let mut pos = 0;
        let mut next_ev = |b: &mut Builder, h: &'static str, kind: EventKind, lanes: &mut BTreeMap<&str, Vec<EventId>>| {
            pos += 1;
            let e = b.ev(format!("s2_gad_c{c}_e{pos}"), h, kind, 2, Role::ClauseGadget { clause: c, pos });
            lanes.entry(h).or_default().push(e);
            e
        };
        let layout: &[&str] = if cl.len() == 3 { &["h_Ca", "h_Cb", "h_Cc", "h_Cd"] } else { &["h_Ca", "h_Cb", "h_Cc"] };
        let z = format!("z_c{c}");
        let zr = next_ev(&mut b, layout[0], EventKind::Read { var: z.clone() }, &mut lanes);
        // Ca[z, B1] Cb[B2, B3] Cc[B4, B5] Cd[B6, z]; B(2q-1) holds literal
        // q's own form, B(2q) its complement.
        let boxes = 2 * cl.len();
        for k in 1..=boxes {
            let (i, lit_pos) = cl[(k - 1) / 2];
            let form = if k % 2 == 1 { lit_pos } else { !lit_pos };
            let h = layout[k / 2];
            let r = next_ev(&mut b, h, EventKind::Read { var: form_var(i, c, form, 1) }, &mut lanes);
            let w = next_ev(&mut b, h, EventKind::Write { var: form_var(i, c, form, 2), val: 1 }, &mut lanes);
            let (_, mw, mr) = hw[&(i, c, u8::from(form))];
            b.t.add_edge(Rel::Rf, mw, r);
            b.t.add_edge(Rel::Rf, w, mr);
        }
        let zw = next_ev(&mut b, layout[layout.len() - 1], EventKind::Write { var: z, val: 1 }, &mut lanes);
        b.t.add_edge(Rel::Rf, zw, zr);
    }
    for evs in lanes.values() {
        b.chain(evs);
    }
    GadgetTrace { n: f.n, trace: b.t, provenance: b.prov }
}

/// Reads the assignment a witness encodes: `x_i` is true iff `m_{i,j,0}`
/// runs before `m_{i,j,1}`. `None` if the copies of a variable disagree.
/// Variables without occurrences come out false.
pub fn decode_assignment(g: &GadgetTrace, w: &crate::trace::Witness) -> Option<Vec<bool>> {
    let t = &g.trace;
    let mut at = vec![usize::MAX; t.num_events()];
    for (k, &e) in w.linearization.iter().enumerate() {
        at[e] = k;
    }
    let mut out: Vec<Option<bool>> = vec![None; g.n];
    for (id, p) in &g.provenance {
        let Role::MessageInsertion { var, clause, bit: 0 } = p.role else { continue };
        if !id.ends_with("_get") {
            continue;
        }
        let get = |b: u8| t.event_id(&format!("s1_ins_x{var}_c{clause}_b{b}_get")).map(|e| at[e]);
        let v = get(0)? < get(1)?;
        match out[var - 1] {
            Some(x) if x != v => return None,
            _ => out[var - 1] = Some(v),
        }
    }
    Some(out.into_iter().map(|x| x.unwrap_or(false)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{validate, ValidateOptions};

    fn cnf(n: usize, cls: &[&[i64]]) -> Cnf3BI {
        let clauses = cls.iter().map(|c| c.iter().map(|&x| (x.unsigned_abs() as usize, x > 0)).collect()).collect();
        Cnf3BI::new(n, clauses).unwrap()
    }

    #[test]
    fn dimacs_parsing() {
        let f = parse_dimacs_restricted("c demo\np cnf 2 1\n1 2 0\n").unwrap();
        assert_eq!(f, cnf(2, &[&[1, 2]]));
        assert_eq!(parse_dimacs_restricted(&f.to_string()).unwrap(), f);
        let four = "p cnf 3 4\n1 2 0\n1 3 0\n-1 2 0\n-1 3 0\n";
        assert_eq!(
            parse_dimacs_restricted(four).unwrap_err(),
            CnfError::TooManyOccurrences { var: 1, count: 4 }
        );
        let dup = parse_dimacs_restricted("p cnf 1 1\n1 1 0\n").unwrap_err();
        assert!(dup.to_string().contains("at most once per clause"), "{dup}");
        assert!(parse_dimacs_restricted("p cnf 1 1\n1 0\n").is_err());
        assert!(parse_dimacs_restricted("p cnf 4 1\n1 2 3 4 0\n").is_err());
        assert!(parse_dimacs_restricted("1 2 0\n").is_err());
        assert!(parse_dimacs_restricted("p cnf 2 2\n1 2 0\n").is_err());
    }

    #[test]
    fn brute_force() {
        // (x1) is not 3-BI, so check satisfied_by on a hand-made formula.
        let unit = Cnf3BI { n: 1, clauses: vec![vec![(1, true)]] };
        assert_eq!(sat_bruteforce(&unit).unwrap(), SatResult::Sat(vec![true]));
        let contra = Cnf3BI { n: 1, clauses: vec![vec![(1, true)], vec![(1, false)]] };
        assert_eq!(sat_bruteforce(&contra).unwrap(), SatResult::Unsat);
        let unsat = cnf(4, &[&[-1, 2], &[1, 3], &[-2, 4], &[1, -3], &[-2, -4]]);
        assert_eq!(sat_bruteforce(&unsat).unwrap(), SatResult::Unsat);
        assert_eq!(sat_bruteforce_gray(&unsat).unwrap(), SatResult::Unsat);
        assert_eq!(sat_bruteforce(&Cnf3BI { n: 25, clauses: vec![] }), Err(TooLarge(25)));
    }

    #[test]
    fn shape() {
        let f = cnf(3, &[&[1, 2, -3], &[-1, 3]]);
        let g = build_gadget(&f);
        let t = &g.trace;
        assert_eq!(t.num_handlers(), 12);
        assert!(validate(t, ValidateOptions::partial()).is_ok());
        assert_eq!(g.provenance.len(), t.num_events());
        let gad = |c: usize| (1..=14).filter(|k| t.event_id(&format!("s2_gad_c{c}_e{k}")).is_some()).count();
        assert_eq!((gad(1), gad(2)), (14, 10));
        // Every literal-form variable has exactly one write and one read.
        let mut uses: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for e in t.events() {
            match &e.kind {
                EventKind::Write { var, .. } => uses.entry(var).or_default().0 += 1,
                EventKind::Read { var } => uses.entry(var).or_default().1 += 1,
                _ => {}
            }
        }
        assert!(uses.values().all(|&u| u == (1, 1)), "{uses:?}");
        assert_eq!(uses.len(), 2 * 2 * 5 + 2);
        assert!(!t.has_rel(Rel::Co));
    }

    #[test]
    fn clause_gadget_edges() {
        // Third literal of clause 1 is the negation of x3: B5 reads the
        // complemented form from m_{3,1,0}, B6 the plain form from m_{3,1,1}.
        let g = build_gadget(&cnf(3, &[&[1, 2, -3]]));
        let t = &g.trace;
        let id = |s: &str| t.event_id(s).unwrap();
        assert!(t.has_edge(Rel::Rf, id("s2_sw_x3_c1_b0_w"), id("s2_gad_c1_e10")));
        assert!(t.has_edge(Rel::Rf, id("s2_gad_c1_e11"), id("s2_sw_x3_c1_b0_r")));
        assert!(t.has_edge(Rel::Rf, id("s2_sw_x3_c1_b1_w"), id("s2_gad_c1_e12")));
        assert!(t.has_edge(Rel::Rf, id("s2_gad_c1_e14"), id("s2_gad_c1_e1")));
        assert_eq!(t.handlers()[t.event(id("s2_gad_c1_e12")).handler], "h_Cd");
    }
}
