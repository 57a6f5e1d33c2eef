//! The sorting example: three inner messages on one handler whose relative
//! order is decided by forwarding routes. Every checker agrees on which of
//! the six orders can happen.

use edcheck::enumerate::check_enum;
use edcheck::fixtures::{sorting_orders, sorting_trace};
use edcheck::nonest::assert_no_nesting;
use edcheck::oracle::{check_oracle, OracleConfig};
use edcheck::smt::{check_smt, SmtConfig};

pub fn run() -> Result<Vec<([usize; 3], bool)>, Box<dyn std::error::Error>> {
    let mut seen = Vec::new();
    for (order, expected) in sorting_orders() {
        let t = sorting_trace(order);
        let e = check_enum(&t)?.verdict();
        let s = check_smt(&t, &SmtConfig::default())?.verdict();
        let o = check_oracle(&t, &OracleConfig::default())?.verdict();
        println!("{order:?}: enum {e:?}, smt {s:?}, oracle {o:?} (expected {expected})");
        if [e, s, o].iter().any(|v| *v != Some(expected)) {
            return Err(format!("checkers disagree on {order:?}").into());
        }
        seen.push((order, expected));
    }
    // Forwarding makes the posts nested, so the polynomial checker refuses.
    match assert_no_nesting(&sorting_trace([1, 2, 3])) {
        Err(e) => println!("no-nesting checker: {e}"),
        Ok(()) => return Err("nesting not detected".into()),
    }
    Ok(seen)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(drop)
}
