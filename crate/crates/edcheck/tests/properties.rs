use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use edcheck::enumerate::{check_enum_with, EnumConfig};
use edcheck::gen::{mutate, random_full_trace, random_partial_trace, GenConfig};
use edcheck::interp::{extract_trace, run, RunEventKind, Schedule};
use edcheck::io::{parse_trace, serialize_trace};
use edcheck::nonest::{assert_no_nesting, check_nonest};
use edcheck::oracle::{check_oracle, OracleConfig};
use edcheck::program::parse_program;
use edcheck::smt::{check_smt, encode, SmtConfig, SolverQuery};
use edcheck::trace::{
    derived_eo_dagger, derived_fr, derived_qo, hb_acyclic, hb_edges, validate, HbResult, Pairs, ValidateOptions,
};
use edcheck::{samples, EventKind, Rel, TraceGraph};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn partial(seed: u64, nested: bool) -> TraceGraph {
    let mut r = rng(seed);
    let t = random_partial_trace(&mut r, &GenConfig { nested, ..Default::default() });
    if seed.is_multiple_of(2) {
        mutate(&mut r, &t)
    } else {
        t
    }
}

/// The same trace with handlers and events inserted in shuffled order under
/// fresh names.
fn relabel(t: &TraceGraph, seed: u64) -> TraceGraph {
    let mut r = rng(seed);
    let mut hs: Vec<usize> = (0..t.num_handlers()).collect();
    let mut es: Vec<usize> = (0..t.num_events()).collect();
    hs.shuffle(&mut r);
    es.shuffle(&mut r);
    let mut out = TraceGraph::new();
    let mut hmap = vec![0; hs.len()];
    for (i, &h) in hs.iter().enumerate() {
        hmap[h] = out.add_handler(&format!("H{i}")).unwrap();
    }
    let mut emap = vec![0; es.len()];
    for (i, &e) in es.iter().enumerate() {
        let ev = t.event(e);
        let kind = match &ev.kind {
            EventKind::Post { receiver } => EventKind::Post { receiver: hmap[*receiver] },
            k => k.clone(),
        };
        emap[e] = out.add_event(&format!("E{i}"), hmap[ev.handler], kind).unwrap();
    }
    for e in t.edges() {
        out.add_edge(e.rel, emap[e.src], emap[e.dst]);
    }
    out
}

/// Independent reading of a solver query: is there a total order of the
/// events satisfying every constraint?
fn query_satisfiable(q: &SolverQuery) -> bool {
    fn holds(q: &SolverQuery, pos: &[usize]) -> bool {
        let lt = |(a, b): (usize, usize)| pos[a] < pos[b];
        q.hard_edges.iter().all(|&e| lt(e))
            && q.serial_disjunctions.iter().all(|&(x, y)| lt(x) || lt(y))
            && q.post_disjunctions.iter().all(|&(a, b)| lt((a, b)) || lt((b, a)))
            && q.fifo_couplings.iter().all(|&(x, y)| lt(x) == lt(y))
    }
    fn place(q: &SolverQuery, pos: &mut Vec<usize>, used: &mut Vec<bool>, k: usize) -> bool {
        let n = used.len();
        if k == n {
            return holds(q, pos);
        }
        for e in 0..n {
            if !used[e] {
                used[e] = true;
                pos[e] = k;
                if place(q, pos, used, k + 1) {
                    return true;
                }
                used[e] = false;
            }
        }
        false
    }
    let n = q.vars.len();
    place(q, &mut vec![0; n], &mut vec![false; n], 0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn interpreter_traces_are_consistent(prog in 0..samples::ALL.len(), seed in any::<u64>()) {
        let p = parse_program(samples::ALL[prog].1).unwrap();
        let r = run(&p, &Schedule::Seeded(seed), 5_000).unwrap();
        let t = extract_trace(&p, &r);
        prop_assert!(validate(&t, ValidateOptions::full()).is_ok());
        prop_assert!(hb_acyclic(&t).is_acyclic());
    }

    #[test]
    fn mailboxes_are_fifo(prog in 0..samples::ALL.len(), seed in any::<u64>()) {
        let p = parse_program(samples::ALL[prog].1).unwrap();
        let r = run(&p, &Schedule::Seeded(seed), 5_000).unwrap();
        let mut posted: BTreeMap<usize, Vec<_>> = BTreeMap::new();
        let mut got: BTreeMap<usize, Vec<_>> = BTreeMap::new();
        for e in &r.events {
            match &e.kind {
                RunEventKind::Post { receiver, newmid, .. } => posted.entry(*receiver).or_default().push(*newmid),
                RunEventKind::Get { .. } => got.entry(e.handler).or_default().push(e.mid),
                _ => {}
            }
        }
        for (h, gs) in got {
            let ps = posted.get(&h).cloned().unwrap_or_default();
            prop_assert!(ps.starts_with(&gs), "handler {}: got {:?}, posted {:?}", h, gs, ps);
        }
    }

    #[test]
    fn derived_relations_are_monotone(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let mut r = rng(seed);
        let t = random_full_trace(&mut r, &GenConfig::default());
        let n = t.num_events();
        prop_assume!(n >= 2);
        let mo: Pairs = t.pairs(Rel::Mo).collect();
        let eo: Pairs = t.pairs(Rel::Eo).collect();
        let (fr, qo, ed) = (derived_fr(&t), derived_qo(&t, &mo), derived_eo_dagger(&t, &eo));
        let rels = [Rel::Rf, Rel::Co, Rel::Pb, Rel::Po];
        let rel = rels[pick.index(rels.len())];
        let (a, b) = (pick.index(n), (pick.index(n) + 1) % n);
        let mut bigger = t.clone();
        bigger.add_edge(rel, a, b);
        let mut mo2 = mo.clone();
        mo2.insert((a, b));
        let mut eo2 = eo.clone();
        eo2.insert((b, a));
        prop_assert!(derived_fr(&bigger).is_superset(&fr));
        prop_assert!(derived_qo(&bigger, &mo2).is_superset(&qo));
        prop_assert!(derived_eo_dagger(&bigger, &eo2).is_superset(&ed));
    }

    #[test]
    fn linearization_respects_hb(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_full_trace(&mut r, &GenConfig::default());
        let HbResult::Acyclic(lin) = hb_acyclic(&t) else { panic!("generated trace is cyclic") };
        let mut pos = vec![0; t.num_events()];
        for (i, &e) in lin.iter().enumerate() {
            pos[e] = i;
        }
        for (rel, a, b) in hb_edges(&t) {
            prop_assert!(pos[a] < pos[b], "{} edge {} -> {} violated", rel, t.name(a), t.name(b));
        }
    }

    #[test]
    fn validation_is_idempotent(seed in any::<u64>()) {
        let t = partial(seed, true);
        let before = serialize_trace(&t);
        let a = validate(&t, ValidateOptions::partial());
        let b = validate(&t, ValidateOptions::partial());
        prop_assert_eq!(a, b);
        prop_assert_eq!(serialize_trace(&t), before);
    }

    #[test]
    fn serialization_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_full_trace(&mut r, &GenConfig::default());
        let s = serialize_trace(&t);
        let back = parse_trace(s.as_bytes()).unwrap();
        prop_assert_eq!(back.handlers(), t.handlers());
        prop_assert_eq!(back.events(), t.events());
        prop_assert_eq!(back.edges().collect::<Vec<_>>(), t.edges().collect::<Vec<_>>());
        prop_assert_eq!(serialize_trace(&back), s);
    }

    #[test]
    fn oracle_ignores_labels(seed in any::<u64>(), shuffle in any::<u64>()) {
        let t = partial(seed, true);
        let cfg = OracleConfig::default();
        let v = check_oracle(&t, &cfg).unwrap().verdict();
        prop_assert_eq!(check_oracle(&relabel(&t, shuffle), &cfg).unwrap().verdict(), v);
    }

    #[test]
    fn saturation_only_prunes(seed in any::<u64>()) {
        let t = partial(seed, true);
        let with = check_enum_with(&t, &EnumConfig::default()).unwrap();
        let without = check_enum_with(&t, &EnumConfig { saturate: false, ..Default::default() }).unwrap();
        prop_assert_eq!(with.outcome.verdict(), without.outcome.verdict());
        prop_assert!(with.stats.checks <= without.stats.checks, "{:?} vs {:?}", with.stats, without.stats);
    }

    #[test]
    fn witnesses_are_valid(seed in any::<u64>()) {
        let t = partial(seed, true);
        let e = check_enum_with(&t, &EnumConfig::default()).unwrap().outcome;
        if let Some(w) = e.witness() {
            let full = w.apply(&t);
            prop_assert!(validate(&full, ValidateOptions::full()).is_ok());
            prop_assert!(hb_acyclic(&full).is_acyclic());
        }
    }

    #[test]
    fn nonest_stays_within_bound(seed in any::<u64>()) {
        let t = partial(seed, false);
        prop_assert!(assert_no_nesting(&t).is_ok());
        let r = check_nonest(&t).unwrap();
        prop_assert!(r.stats.within_bound());
        let e = check_enum_with(&t, &EnumConfig::default()).unwrap().outcome;
        prop_assert_eq!(r.outcome.verdict(), e.verdict());
    }
}

proptest! {
    // Each case starts a solver process.
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn encoding_matches_total_orders(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_partial_trace(&mut r, &GenConfig { max_events: 8, ..Default::default() });
        let t = if seed % 2 == 0 { mutate(&mut r, &t) } else { t };
        let q = encode(&t).unwrap();
        let o = check_smt(&t, &SmtConfig::default()).unwrap();
        prop_assert_eq!(o.verdict(), Some(query_satisfiable(&q)));
        if let Some(w) = o.witness() {
            prop_assert!(w.check(&t).is_ok());
        }
    }
}
