//! Generate a benchmark corpus from the sample programs, write it to a
//! directory, and benchmark two checkers over it.
//!
//! `cargo run --example bench_corpus -- <dir>` keeps the corpus in `<dir>`;
//! without an argument a temporary directory is used.

use std::path::Path;
use std::time::Duration;

use edcheck::bench::{bench_run, Algo, BenchReport, RunOptions};
use edcheck::interp::{extract_trace, run as run_program, Schedule};
use edcheck::io::serialize_trace;
use edcheck::program::parse_program;
use edcheck::samples;

pub fn write_corpus(dir: &Path, per_program: u64) -> Result<usize, Box<dyn std::error::Error>> {
    let mut n = 0;
    for (name, src) in samples::ALL {
        let p = parse_program(src)?;
        for seed in 0..per_program {
            let r = run_program(&p, &Schedule::Seeded(seed), 10_000)?;
            let t = extract_trace(&p, &r).to_partial();
            std::fs::write(dir.join(format!("{name}_{seed:03}.json")), serialize_trace(&t))?;
            n += 1;
        }
    }
    Ok(n)
}

pub fn run_in(dir: &Path, per_program: u64) -> Result<BenchReport, Box<dyn std::error::Error>> {
    let n = write_corpus(dir, per_program)?;
    println!("wrote {n} traces to {}", dir.display());
    let opts = RunOptions { timeout: Duration::from_secs(10), ..Default::default() };
    let report = bench_run(dir, &[Algo::Enum, Algo::Smt], &opts)?;
    print!("{}", report.to_csv());
    Ok(report)
}

pub fn run() -> Result<BenchReport, Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    run_in(dir.path(), 3)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    match std::env::args().nth(1) {
        Some(d) => {
            std::fs::create_dir_all(&d)?;
            run_in(Path::new(&d), 10).map(drop)
        }
        None => run().map(drop),
    }
}
