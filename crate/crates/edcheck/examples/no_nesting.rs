//! The polynomial checker for traces where only initial messages post, on
//! a family of growing token-ring traces.

use std::time::Instant;

use edcheck::fixtures::ring_trace;
use edcheck::nonest::check_nonest;

pub fn run() -> Result<Vec<(usize, usize)>, Box<dyn std::error::Error>> {
    let mut sizes = Vec::new();
    for n in [20, 40, 80] {
        let t = ring_trace(n);
        let start = Instant::now();
        let r = check_nonest(&t)?;
        println!(
            "n={n}: {} in {:.2?}, {} configurations (bound e^{:.0})",
            r.outcome.label(),
            start.elapsed(),
            r.stats.visited,
            r.stats.log_bound()
        );
        if r.outcome.verdict() != Some(true) || !r.stats.within_bound() {
            return Err(format!("ring {n}: unexpected result").into());
        }
        sizes.push((n, r.stats.visited));
    }
    Ok(sizes)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(drop)
}
