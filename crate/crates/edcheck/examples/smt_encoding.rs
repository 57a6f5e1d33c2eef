//! Encode a partial trace as a difference-logic query, print the SMT-LIB
//! text, and solve it with the configured solver.

use edcheck::fixtures::TraceBuilder;
use edcheck::io::witness_to_json;
use edcheck::smt::{check_smt, encode, render_smtlib, SmtConfig};
use edcheck::{Outcome, Rel};

pub fn run() -> Result<Outcome, Box<dyn std::error::Error>> {
    // Two posts to the same handler from different senders; the second
    // message reads what the first wrote, so it must run second.
    let mut b = TraceBuilder::new();
    b.post("pa", "a", "h").post("pb", "b", "h");
    b.get("ga", "h").write("wa", "h", "x", 1).edge(Rel::Pb, "pa", "ga").edge(Rel::Po, "ga", "wa");
    b.get("gb", "h").read("rb", "h", "x").edge(Rel::Pb, "pb", "gb").edge(Rel::Po, "gb", "rb");
    b.edge(Rel::Rf, "wa", "rb");
    let t = b.build();

    let q = encode(&t)?;
    println!(
        "{} hard edges, {} serialization disjunctions, {} post orderings, {} FIFO couplings",
        q.hard_edges.len(),
        q.serial_disjunctions.len(),
        q.post_disjunctions.len(),
        q.fifo_couplings.len()
    );
    print!("{}", render_smtlib(&q));

    let o = check_smt(&t, &SmtConfig::default())?;
    println!("verdict: {}", o.label());
    if let Some(w) = o.witness() {
        print!("{}", witness_to_json(&t, w));
    }
    Ok(o)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(drop)
}
