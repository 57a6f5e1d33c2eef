//! Acceptance criteria, one pass/fail line each. Run with
//! `cargo test --test acceptance`.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use edcheck::bench::{bench_traces, Algo, RunOptions, CSV_HEADER};
use edcheck::enumerate::{check_enum, saturate, Saturation};
use edcheck::fixtures::{enum_blowup_trace, ring_trace, sorting_orders, sorting_trace};
use edcheck::gadget::{build_gadget, decode_assignment, random_cnf, sat_bruteforce, sat_bruteforce_gray, Cnf3BI, SatResult};
use edcheck::gen::small_corpus;
use edcheck::interp::{extract_trace, run, run_exhaustive, Schedule};
use edcheck::io::serialize_trace;
use edcheck::nonest::{assert_no_nesting, check_nonest};
use edcheck::oracle::{check_oracle, OracleConfig, OracleResult};
use edcheck::program::parse_program;
use edcheck::smt::{check_smt, encode, render_smtlib, SmtConfig};
use edcheck::trace::{hb_acyclic, validate, ValidateOptions};
use edcheck::{samples, Outcome, TraceGraph};

type Verdict = Result<String, String>;

const CORPUS: usize = 500;

fn oracle(t: &TraceGraph, cfg: &OracleConfig) -> Option<bool> {
    check_oracle(t, cfg).expect("corpus traces are well formed").verdict()
}

fn witness_ok(t: &TraceGraph, o: &Outcome) -> bool {
    o.witness().is_none_or(|w| w.check(t).is_ok())
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let corpus = small_corpus(CORPUS);
    let smt = SmtConfig::default();
    let (mut bad, mut consistent, mut unnested) = (Vec::new(), 0, 0);
    for (i, t) in corpus.iter().enumerate() {
        let want = oracle(t, &OracleConfig::default());
        consistent += usize::from(want == Some(true));
        let e = check_enum(t).unwrap();
        let s = check_smt(t, &smt).unwrap();
        let mut got = vec![("enum", e.verdict(), witness_ok(t, &e)), ("smt", s.verdict(), witness_ok(t, &s))];
        if assert_no_nesting(t).is_ok() {
            unnested += 1;
            let n = check_nonest(t).unwrap().outcome;
            got.push(("nonest", n.verdict(), witness_ok(t, &n)));
        }
        for (name, v, wok) in got {
            if v != want || !wok {
                bad.push(format!("#{i} {name}: {v:?} vs oracle {want:?}"));
            }
        }
    }
    let took = start.elapsed();
    let summary = format!(
        "{CORPUS} traces ({consistent} consistent, {unnested} without nesting), {} disagreements, {:.1}s",
        bad.len(),
        took.as_secs_f64()
    );
    if bad.is_empty() && took < Duration::from_secs(300) && consistent > 0 && consistent < CORPUS {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", bad.iter().take(5).cloned().collect::<Vec<_>>().join("; ")))
    }
}

fn criterion_2() -> Verdict {
    let (mut runs, mut failures) = (0, Vec::new());
    for (name, src) in samples::ALL {
        let p = parse_program(src).unwrap();
        for seed in 0..170 {
            let r = run(&p, &Schedule::Seeded(seed), 5_000).unwrap();
            let t = extract_trace(&p, &r);
            runs += 1;
            let v = validate(&t, ValidateOptions::full());
            if !v.is_ok() || !hb_acyclic(&t).is_acyclic() {
                failures.push(format!("{name} seed {seed}"));
            }
        }
    }
    let summary = format!("{runs} runs over {} programs, {} failures", samples::ALL.len(), failures.len());
    if failures.is_empty() && runs >= 1000 {
        Ok(summary)
    } else {
        Err(format!("{summary}: {:?}", &failures[..failures.len().min(5)]))
    }
}

fn cnf(n: usize, cls: &[&[i64]]) -> Cnf3BI {
    let clauses = cls.iter().map(|c| c.iter().map(|&x| (x.unsigned_abs() as usize, x > 0)).collect()).collect();
    Cnf3BI::new(n, clauses).unwrap()
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut formulas = Vec::new();
    while formulas.len() < 60 {
        let (n, m) = (rng.random_range(2..=4), rng.random_range(1..=4));
        formulas.extend(random_cnf(&mut rng, n, m));
    }
    // No 3-BI-3SAT formula with n, m <= 4 is unsatisfiable, so the negative
    // side uses five clauses over four variables.
    let mut unsat = vec![cnf(4, &[&[-1, 2], &[1, 3], &[-2, 4], &[1, -3], &[-2, -4]])];
    while unsat.len() < 6 {
        if let Some(f) = random_cnf(&mut rng, 4, 5) {
            if sat_bruteforce(&f).unwrap() == SatResult::Unsat {
                unsat.push(f);
            }
        }
    }
    let smt = SmtConfig::default();
    let mut bad = Vec::new();
    for f in formulas.iter().chain(&unsat) {
        let g = build_gadget(f);
        let sat = matches!(sat_bruteforce(f).unwrap(), SatResult::Sat(_));
        if sat != matches!(sat_bruteforce_gray(f).unwrap(), SatResult::Sat(_)) {
            bad.push(format!("{}: brute-force orders disagree", f.to_string().replace('\n', " ")));
        }
        let o = check_smt(&g.trace, &smt).unwrap();
        let decoded = o.witness().map(|w| decode_assignment(&g, w).is_some_and(|a| f.satisfied_by(&a)));
        if o.verdict() != Some(sat) || decoded == Some(false) {
            bad.push(format!("{}: sat={sat}, smt={}", f.to_string().replace('\n', " "), o.label()));
        }
    }
    // Oracle spot checks on single-clause formulas.
    let spot = [
        cnf(2, &[&[1, 2]]),
        cnf(2, &[&[-1, 2]]),
        cnf(2, &[&[1, -2]]),
        cnf(2, &[&[-1, -2]]),
        cnf(3, &[&[-1, 2, 3]]),
        cnf(3, &[&[1, 2, -3]]),
    ];
    let ocfg = OracleConfig { max_events: 128, ..Default::default() };
    for f in &spot {
        let g = build_gadget(f);
        match check_oracle(&g.trace, &ocfg).unwrap() {
            OracleResult::Consistent(ws) if decode_assignment(&g, &ws[0]).is_some_and(|a| f.satisfied_by(&a)) => {}
            r => bad.push(format!("oracle on {}: {:?}", f.to_string().replace('\n', " "), r.verdict())),
        }
    }
    let summary = format!(
        "{} in-range formulas (all satisfiable), {} unsatisfiable 5-clause formulas, {} oracle spot checks, {} mismatches",
        formulas.len(),
        unsat.len(),
        spot.len(),
        bad.len()
    );
    if bad.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}: {bad:?}"))
    }
}

fn criterion_4() -> Verdict {
    let smt = SmtConfig::default();
    let mut bad = Vec::new();
    for (order, want) in sorting_orders() {
        let t = sorting_trace(order);
        let verdicts = [
            ("enum", check_enum(&t).unwrap().verdict()),
            ("smt", check_smt(&t, &smt).unwrap().verdict()),
            ("oracle", oracle(&t, &OracleConfig::default())),
        ];
        for (name, v) in verdicts {
            if v != Some(want) {
                bad.push(format!("{order:?} {name}: {v:?}"));
            }
        }
        if assert_no_nesting(&t).is_ok() {
            bad.push(format!("{order:?}: nested posts not detected"));
        }
    }
    // The program version: the final value of `order` spells the run order.
    let p = parse_program(samples::SORTING).unwrap();
    let finals: BTreeSet<i64> = run_exhaustive(&p, 64, 10_000)
        .iter()
        .filter(|r| !r.truncated)
        .map(|r| r.last.vars[p.var_id("order").unwrap()])
        .collect();
    let spell = |o: [i64; 3]| o.iter().fold(0, |a, &m| a * 4 + m);
    let want: BTreeSet<i64> = [[1, 2, 3], [2, 1, 3], [2, 3, 1]].map(spell).into();
    if finals != want {
        bad.push(format!("reachable final orders {finals:?}, expected {want:?}"));
    }
    let summary = format!("(2,1,3) consistent, (3,2,1) inconsistent; reachable program orders {finals:?}");
    if bad.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}: {bad:?}"))
    }
}

fn criterion_5() -> Verdict {
    let corpus = small_corpus(CORPUS);
    let strict = OracleConfig { strict_eo: true, ..Default::default() };
    let bad: Vec<usize> = corpus
        .iter()
        .enumerate()
        .filter(|(_, t)| oracle(t, &OracleConfig::default()) != oracle(t, &strict))
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        Ok(format!("{CORPUS} traces, strict and FIFO-derived execution orders agree"))
    } else {
        Err(format!("disagreements on traces {bad:?}"))
    }
}

fn criterion_6() -> Verdict {
    let corpus = small_corpus(CORPUS);
    let all = OracleConfig { all_witnesses: true, ..Default::default() };
    let (mut checked, mut edges, mut bad) = (0, 0, Vec::new());
    for (i, t) in corpus.iter().enumerate() {
        let sat = saturate(t).unwrap();
        match (check_oracle(t, &all).unwrap(), sat) {
            (OracleResult::Consistent(ws), Saturation::Saturated(st)) => {
                checked += 1;
                edges += st.committed_eo.len() + st.committed_mo.len();
                let before = |seq: Option<&Vec<usize>>, a: usize, b: usize| {
                    let seq = seq.map(Vec::as_slice).unwrap_or(&[]);
                    let pos = |x| seq.iter().position(|&y| y == x);
                    matches!((pos(a), pos(b)), (Some(x), Some(y)) if x < y)
                };
                for w in &ws {
                    for &(a, b) in &st.committed_eo {
                        if !before(w.eo.get(&t.event(a).handler), a, b) {
                            bad.push(format!("#{i} eo {}<{}", t.name(a), t.name(b)));
                        }
                    }
                    for &(a, b) in &st.committed_mo {
                        let h = match t.event(a).kind {
                            edcheck::EventKind::Post { receiver } => receiver,
                            _ => unreachable!(),
                        };
                        if !before(w.mo.get(&h), a, b) {
                            bad.push(format!("#{i} mo {}<{}", t.name(a), t.name(b)));
                        }
                    }
                }
            }
            (OracleResult::Consistent(_), Saturation::Inconsistent(_)) => bad.push(format!("#{i}: saturation refuted a consistent trace")),
            _ => {}
        }
    }
    let summary = format!("{checked} consistent traces, {edges} committed edges, {} violations", bad.len());
    if bad.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}: {:?}", &bad[..bad.len().min(5)]))
    }
}

fn criterion_7() -> Verdict {
    let t = enum_blowup_trace(8);
    let timeout = edcheck::DEFAULT_TIMEOUT;
    let opts = RunOptions { timeout, ..Default::default() };
    let report = bench_traces(&[("blowup".into(), t.clone())], &[Algo::Enum, Algo::Smt], &opts);
    let csv = report.to_csv();
    let e = &report.rows[0];
    let s = &report.rows[1];
    let smt_time = s.mean_time_s().unwrap_or(f64::INFINITY);
    let summary = format!(
        "{} events, enum timeouts {} (limit {}s), smt {} in {smt_time:.2}s; csv: {}",
        t.num_events(),
        e.timeouts,
        timeout.as_secs(),
        if s.inconsistent == 1 { "inconsistent" } else { "no verdict" },
        csv.lines().skip(1).collect::<Vec<_>>().join(" | ")
    );
    if e.timeouts == 1 && s.timeouts == 0 && s.traces == 1 && smt_time < 10.0 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn criterion_8() -> Verdict {
    let mut pts = Vec::new();
    let mut notes = Vec::new();
    for n in [20, 40, 80, 160] {
        let t = ring_trace(n);
        if t.num_handlers() != 3 || t.num_events() != n {
            return Err(format!("ring {n}: {} handlers, {} events", t.num_handlers(), t.num_events()));
        }
        // Median of three runs against timer noise.
        let mut times = Vec::new();
        let mut stats = None;
        for _ in 0..3 {
            let s = Instant::now();
            let r = check_nonest(&t).unwrap();
            times.push(s.elapsed().as_secs_f64());
            if r.outcome.verdict() != Some(true) {
                return Err(format!("ring {n} not consistent"));
            }
            stats = Some(r.stats);
        }
        times.sort_by(f64::total_cmp);
        let st = stats.unwrap();
        if !st.within_bound() {
            return Err(format!("ring {n}: {} configurations exceed the bound", st.visited));
        }
        notes.push(format!("n={n}: {} configs, {:.4}s", st.visited, times[1]));
        pts.push(((n as f64).ln(), times[1].max(1e-6).ln()));
    }
    // Least-squares slope of log time against log n.
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let num: f64 = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    let slope = num / den;
    let summary = format!("log-log slope {slope:.2}; {}", notes.join(", "));
    if slope < 4.0 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

/// Compares against `tests/golden/<name>`; `EDCHECK_BLESS=1` rewrites it.
fn matches_golden(name: &str, actual: &str) -> bool {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    if std::env::var_os("EDCHECK_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    std::fs::read_to_string(&path).is_ok_and(|g| g == actual)
}

fn criterion_9() -> Verdict {
    let mut bad = Vec::new();
    if !matches_golden("empty_trace.json", &serialize_trace(&TraceGraph::new())) {
        bad.push("empty_trace.json");
    }
    let mut b = edcheck::fixtures::TraceBuilder::new();
    b.post("p1", "h0", "h1").post("p2", "h0", "h1").get("g1", "h1").get("g2", "h1");
    b.po_chain(&["p1", "p2"]).edge(edcheck::Rel::Pb, "p1", "g1").edge(edcheck::Rel::Pb, "p2", "g2");
    if !matches_golden("two_messages.smt2", &render_smtlib(&encode(&b.build()).unwrap())) {
        bad.push("two_messages.smt2");
    }
    if !matches_golden("sorting_forbidden.smt2", &render_smtlib(&encode(&sorting_trace([3, 2, 1])).unwrap())) {
        bad.push("sorting_forbidden.smt2");
    }
    if !matches_golden("bench_header.csv", &format!("{CSV_HEADER}\n")) {
        bad.push("bench_header.csv");
    }
    if bad.is_empty() {
        Ok("trace serialization, two SMT-LIB renderings and the CSV header match their golden files".into())
    } else {
        Err(format!("mismatch: {bad:?}"))
    }
}


fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: Vec<(u32, &str, fn() -> Verdict)> = vec![
        (1, "oracle equivalence", criterion_1),
        (2, "interpreter traces are consistent", criterion_2),
        (3, "reduction correctness", criterion_3),
        (4, "sorting fixture", criterion_4),
        (5, "FIFO vs strict execution order", criterion_5),
        (6, "saturation soundness", criterion_6),
        (7, "scalability direction", criterion_7),
        (8, "no-nesting polynomial behaviour", criterion_8),
        (9, "format stability", criterion_9),
    ];
    let handles: Vec<_> = criteria
        .into_iter()
        .map(|(n, name, f)| (n, name, thread::spawn(f)))
        .collect();
    let mut failed = 0;
    for (n, name, h) in handles {
        let res = h.join().unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match res {
            Ok(msg) => println!("[PASS] criterion {n}: {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] criterion {n}: {name}: {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
