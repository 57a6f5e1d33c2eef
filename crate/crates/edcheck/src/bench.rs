//! Benchmark harness: runs checkers over a directory of traces and reports
//! per-group counts and mean times.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use log::warn;

use crate::enumerate::{check_enum_with, EnumConfig};
use crate::nonest::{check_nonest, NonestError};
use crate::oracle::{check_oracle, OracleConfig, OracleResult};
use crate::smt::{check_smt, SmtConfig, SolverBackend};
use crate::trace::{derive_messages, TraceGraph};
use crate::Outcome;

pub const CSV_HEADER: &str = "benchmark,algo,E,M,H,T,consistent,timeouts,mean_time_s";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algo {
    Enum,
    Smt,
    Nonest,
    Oracle,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Enum => "enum",
            Algo::Smt => "smt",
            Algo::Nonest => "nonest",
            Algo::Oracle => "oracle",
        }
    }
}

impl FromStr for Algo {
    type Err = String;
    fn from_str(s: &str) -> Result<Algo, String> {
        match s {
            "enum" => Ok(Algo::Enum),
            "smt" => Ok(Algo::Smt),
            "nonest" => Ok(Algo::Nonest),
            "oracle" => Ok(Algo::Oracle),
            _ => Err(format!("unknown algorithm '{s}' (expected enum, smt, nonest or oracle)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub timeout: Duration,
    pub backend: SolverBackend,
    pub fifo: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { timeout: crate::DEFAULT_TIMEOUT, backend: SolverBackend::from_env(), fifo: true }
    }
}

/// Runs one checker. `Err` covers everything that is not a verdict or a
/// timeout: invalid traces, refusals, solver failures.
///
/// `enum` and `smt` stop at the timeout; `nonest` and `oracle` have no
/// internal deadline and are classified as timeouts after the fact.
pub fn run_algo(t: &TraceGraph, algo: Algo, opts: &RunOptions) -> (Result<Outcome, String>, Duration) {
    let start = Instant::now();
    let res = match algo {
        Algo::Enum => {
            let cfg = EnumConfig { timeout: Some(opts.timeout), budget: None, ..Default::default() };
            check_enum_with(t, &cfg).map(|r| r.outcome).map_err(|e| e.to_string())
        }
        Algo::Smt => {
            let cfg = SmtConfig { backend: opts.backend.clone(), timeout: Some(opts.timeout), fifo: opts.fifo };
            match check_smt(t, &cfg) {
                Ok(Outcome::BackendError(e)) => Err(e),
                Ok(o) => Ok(o),
                Err(e) => Err(e.to_string()),
            }
        }
        Algo::Nonest => check_nonest(t).map(|r| r.outcome).map_err(|e: NonestError| e.to_string()),
        Algo::Oracle => match check_oracle(t, &OracleConfig::default()) {
            Ok(OracleResult::Consistent(mut ws)) => Ok(Outcome::Consistent(ws.remove(0))),
            Ok(OracleResult::Inconsistent) => Ok(Outcome::Inconsistent),
            Ok(OracleResult::Refused(why)) => Err(why),
            Err(e) => Err(e.to_string()),
        },
    };
    let took = start.elapsed();
    let res = match res {
        Ok(_) if took > opts.timeout => Ok(Outcome::Timeout),
        r => r,
    };
    (res, took)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchRow {
    pub benchmark: String,
    pub algo: String,
    pub max_events: usize,
    pub max_messages: usize,
    pub max_handlers: usize,
    /// Traces with a verdict or a timeout.
    pub traces: usize,
    pub consistent: usize,
    pub inconsistent: usize,
    pub timeouts: usize,
    /// Excluded from `traces`.
    pub errors: usize,
    pub total_time: Duration,
}

impl BenchRow {
    /// Over traces that did not time out.
    pub fn mean_time_s(&self) -> Option<f64> {
        let n = self.consistent + self.inconsistent;
        (n > 0).then(|| self.total_time.as_secs_f64() / n as f64)
    }
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Benchmark group of a file stem: the stem without a trailing `_<digits>`.
pub fn group_of(stem: &str) -> &str {
    match stem.rsplit_once('_') {
        Some((g, d)) if !g.is_empty() && !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()) => g,
        _ => stem,
    }
}

fn messages(t: &TraceGraph) -> usize {
    match derive_messages(t) {
        Ok(ms) => ms.messages.len(),
        Err(_) => t.events().iter().filter(|e| e.kind.is_get()).count(),
    }
}

/// Runs every algorithm on every `(group, trace)` pair, in order.
pub fn bench_traces(traces: &[(String, TraceGraph)], algos: &[Algo], opts: &RunOptions) -> BenchReport {
    let mut rows: BTreeMap<(String, usize), BenchRow> = BTreeMap::new();
    for (group, t) in traces {
        for (ai, &algo) in algos.iter().enumerate() {
            let row = rows.entry((group.clone(), ai)).or_insert_with(|| BenchRow {
                benchmark: group.clone(),
                algo: algo.name().into(),
                ..Default::default()
            });
            row.max_events = row.max_events.max(t.num_events());
            row.max_messages = row.max_messages.max(messages(t));
            row.max_handlers = row.max_handlers.max(t.num_handlers());
            let (res, took) = run_algo(t, algo, opts);
            match res {
                Err(e) => {
                    warn!("{group}: {}: {e}", algo.name());
                    row.errors += 1;
                    continue;
                }
                Ok(Outcome::Timeout) => row.timeouts += 1,
                Ok(o) => {
                    if o.verdict() == Some(true) {
                        row.consistent += 1;
                    } else {
                        row.inconsistent += 1;
                    }
                    row.total_time += took;
                }
            }
            row.traces += 1;
        }
    }
    BenchReport { rows: rows.into_values().collect() }
}

/// Reads every `*.json` trace under `dir` (sorted by name), dropping any
/// `mo`/`eo` edges. Unreadable files are skipped with a warning.
pub fn load_corpus(dir: &Path) -> std::io::Result<Vec<(String, TraceGraph)>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        match crate::io::read_trace_file(&p) {
            Ok(t) => {
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                out.push((group_of(stem).to_string(), t.to_partial()));
            }
            Err(e) => warn!("skipping {}: {e}", p.display()),
        }
    }
    Ok(out)
}

pub fn bench_run(dir: &Path, algos: &[Algo], opts: &RunOptions) -> std::io::Result<BenchReport> {
    Ok(bench_traces(&load_corpus(dir)?, algos, opts))
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let mean = r.mean_time_s().map(|m| format!("{m:.6}")).unwrap_or_default();
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.benchmark, r.algo, r.max_events, r.max_messages, r.max_handlers, r.traces, r.consistent,
                r.timeouts, mean
            )
            .unwrap();
        }
        s
    }

    /// One line per benchmark, one column group (consistent, timeouts,
    /// time) per algorithm.
    pub fn to_latex(&self) -> String {
        let mut algos: Vec<&str> = Vec::new();
        let mut by_bench: BTreeMap<&str, Vec<&BenchRow>> = BTreeMap::new();
        for r in &self.rows {
            if !algos.contains(&r.algo.as_str()) {
                algos.push(&r.algo);
            }
            by_bench.entry(&r.benchmark).or_default().push(r);
        }
        let mut s = String::new();
        writeln!(s, "\\begin{{tabular}}{{l r r r r{}}}", " r r r".repeat(algos.len())).unwrap();
        writeln!(s, "\\hline").unwrap();
        let mut head = String::from("Benchmark & \\#E & \\#M & \\#H & \\#T");
        for a in &algos {
            write!(head, " & {a} cons. & {a} t/o & {a} time (s)").unwrap();
        }
        writeln!(s, "{head} \\\\").unwrap();
        writeln!(s, "\\hline").unwrap();
        for (b, rows) in by_bench {
            let r0 = rows[0];
            let mut line = format!(
                "{} & {} & {} & {} & {}",
                b.replace('_', "\\_"),
                r0.max_events,
                r0.max_messages,
                r0.max_handlers,
                rows.iter().map(|r| r.traces).max().unwrap_or(0)
            );
            for a in &algos {
                match rows.iter().find(|r| r.algo == *a) {
                    Some(r) => {
                        let t = r.mean_time_s().map(|m| format!("{m:.3}")).unwrap_or_else(|| "--".into());
                        write!(line, " & {} & {} & {t}", r.consistent, r.timeouts).unwrap();
                    }
                    None => line.push_str(" & -- & -- & --"),
                }
            }
            writeln!(s, "{line} \\\\").unwrap();
        }
        writeln!(s, "\\hline").unwrap();
        writeln!(s, "\\end{{tabular}}").unwrap();
        s
    }
}
