//! Exhaustive reference checking: list every mailbox/execution order that
//! explains a trace, and compare with what saturation commits to.

use edcheck::enumerate::{saturate, Saturation};
use edcheck::fixtures::TraceBuilder;
use edcheck::oracle::{check_oracle, OracleConfig, OracleResult};
use edcheck::Rel;

pub fn run() -> Result<usize, Box<dyn std::error::Error>> {
    // Three independent senders post to `h`; only `c`'s message is forced
    // after `a`'s by a read.
    let mut b = TraceBuilder::new();
    for s in ["a", "b", "c"] {
        let (p, g) = (format!("p{s}"), format!("g{s}"));
        b.post(&p, s, "h").get(&g, "h").edge(Rel::Pb, &p, &g);
    }
    b.write("wa", "h", "x", 1).edge(Rel::Po, "ga", "wa");
    b.read("rc", "h", "x").edge(Rel::Po, "gc", "rc").edge(Rel::Rf, "wa", "rc");
    let t = b.build();

    let cfg = OracleConfig { all_witnesses: true, ..Default::default() };
    let OracleResult::Consistent(ws) = check_oracle(&t, &cfg)? else {
        return Err("expected a consistent trace".into());
    };
    let h = t.handler_id("h").unwrap();
    for w in &ws {
        let names: Vec<&str> = w.eo[&h].iter().map(|&e| t.name(e)).collect();
        println!("execution order on h: {}", names.join(" < "));
    }
    if let Saturation::Saturated(st) = saturate(&t)? {
        for (x, y) in &st.committed_eo {
            println!("saturation commits {} < {}", t.name(*x), t.name(*y));
        }
    }
    Ok(ws.len())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(drop)
}
