//! Reduce a small 3SAT formula (each variable at most twice positive and
//! once negative) to a trace, check the trace, and read the assignment back
//! out of the witness.

use edcheck::gadget::{build_gadget, decode_assignment, parse_dimacs_restricted, sat_bruteforce, SatResult};
use edcheck::smt::{check_smt, SmtConfig};

const FORMULA: &str = "c (x1 or x2) and (not x1 or not x2) and (x1 or not x3)
p cnf 3 3
1 2 0
-1 -2 0
1 -3 0
";

pub fn run() -> Result<Option<Vec<bool>>, Box<dyn std::error::Error>> {
    let f = parse_dimacs_restricted(FORMULA)?;
    let g = build_gadget(&f);
    println!(
        "{} variables, {} clauses -> {} events on {} handlers",
        f.n,
        f.clauses.len(),
        g.trace.num_events(),
        g.trace.num_handlers()
    );
    let expected = sat_bruteforce(&f)?;
    let o = check_smt(&g.trace, &SmtConfig::default())?;
    println!("brute force: {expected:?}; trace: {}", o.label());
    let assignment = o.witness().and_then(|w| decode_assignment(&g, w));
    match (&expected, &assignment) {
        (SatResult::Sat(_), Some(a)) if f.satisfied_by(a) => println!("decoded assignment {a:?} satisfies the formula"),
        (SatResult::Unsat, None) if o.verdict() == Some(false) => {}
        _ => return Err("reduction and brute force disagree".into()),
    }
    Ok(assignment)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(drop)
}
