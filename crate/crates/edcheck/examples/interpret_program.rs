//! Run a small event-driven program under random and exhaustive schedules
//! and check that every extracted trace is consistent.

use std::collections::BTreeSet;

use edcheck::interp::{extract_trace, run as run_program, run_exhaustive, Schedule};
use edcheck::program::parse_program;
use edcheck::samples;
use edcheck::smt::{check_smt, SmtConfig};
use edcheck::trace::{hb_acyclic, validate, ValidateOptions};

pub fn run() -> Result<BTreeSet<i64>, Box<dyn std::error::Error>> {
    let p = parse_program(samples::COUNTING)?;
    let count = p.var_id("count").ok_or("no count variable")?;
    for seed in 0..5 {
        let r = run_program(&p, &Schedule::Seeded(seed), 1_000)?;
        let t = extract_trace(&p, &r);
        let ok = validate(&t, ValidateOptions::full()).is_ok() && hb_acyclic(&t).is_acyclic();
        let partial = t.to_partial();
        let smt = check_smt(&partial, &SmtConfig::default())?;
        println!(
            "seed {seed}: {} events, count = {}, full trace ok: {ok}, partial trace: {}",
            t.num_events(),
            r.last.vars[count],
            smt.label()
        );
        if !ok || smt.verdict() != Some(true) {
            return Err(format!("seed {seed} produced a bad trace").into());
        }
    }

    // Increments are serialized by the counter's mailbox, but the reporter
    // can read the counter at any point.
    let total = p.var_id("total").ok_or("no total variable")?;
    let finals: BTreeSet<i64> =
        run_exhaustive(&p, 64, 1_000).iter().filter(|r| !r.truncated).map(|r| r.last.vars[total]).collect();
    println!("reachable reported totals: {finals:?}");
    Ok(finals)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(drop)
}
