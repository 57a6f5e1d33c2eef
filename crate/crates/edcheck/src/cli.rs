//! Command-line interface.
//!
//! Exit codes: 0 consistent / ok, 1 inconsistent / violations, 2 usage, I/O,
//! invalid trace or refusal, 3 timeout, 4 solver backend error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;

use crate::bench::{bench_run, Algo, RunOptions};
use crate::enumerate::{check_enum_with, EnumConfig};
use crate::gadget::{build_gadget, parse_dimacs_restricted};
use crate::interp::{extract_trace, run, run_exhaustive, Schedule};
use crate::io::{read_trace_file, serialize_trace, witness_to_json};
use crate::nonest::check_nonest;
use crate::oracle::{check_oracle, OracleConfig, OracleResult};
use crate::program::parse_program;
use crate::smt::{check_smt, SmtConfig, SolverBackend};
use crate::trace::{hb_acyclic, validate, Mode, ValidateOptions};
use crate::{Outcome, TraceGraph};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INCONSISTENT: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_TIMEOUT: u8 = 3;
pub const EXIT_BACKEND: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "edcheck", version, about = "Consistency checking for event-driven traces")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check a trace file for well-formedness.
    Validate {
        trace: PathBuf,
        /// Require total mo and eo and check happens-before acyclicity.
        #[arg(long)]
        full: bool,
        /// Do not repair missing initial-message precedence.
        #[arg(long)]
        strict: bool,
    },
    /// Decide whether a partial trace can be completed.
    Check(CheckArgs),
    /// Execute a program and write the traces it induces.
    Run(RunArgs),
    /// Build the hardness trace for a 3-BI-3SAT formula.
    Gadget {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Run checkers over a directory of traces.
    Bench {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "enum,smt", value_delimiter = ',')]
        algos: Vec<String>,
        #[arg(long, default_value_t = 120_000)]
        timeout_ms: u64,
        #[arg(long)]
        solver_cmd: Option<String>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        latex: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgoArg {
    Enum,
    Smt,
    Nonest,
    Oracle,
}

#[derive(Args, Debug)]
struct CheckArgs {
    trace: PathBuf,
    #[arg(long, value_enum, default_value = "smt")]
    algo: AlgoArg,
    /// Write the witness (JSON) here when consistent.
    #[arg(long)]
    witness: Option<PathBuf>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Solver command line; defaults to $EDCHECK_SOLVER_CMD or `z3 -in -smt2`.
    #[arg(long)]
    solver_cmd: Option<String>,
    /// Leave out the FIFO coupling constraints (smt).
    #[arg(long)]
    no_fifo: bool,
    /// Enumerate execution orders independently (oracle).
    #[arg(long)]
    strict_eo: bool,
    /// Report every witness (oracle).
    #[arg(long)]
    all_witnesses: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    program: PathBuf,
    #[arg(long, conflicts_with = "exhaustive")]
    seed: Option<u64>,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, requires = "depth")]
    exhaustive: bool,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    max_steps: usize,
    #[arg(long)]
    out_dir: PathBuf,
    /// Leave out mo and eo.
    #[arg(long)]
    partial: bool,
}

struct Failure(u8, String);

fn fail<E: std::fmt::Display>(code: u8) -> impl Fn(E) -> Failure {
    move |e| Failure(code, e.to_string())
}

fn load(path: &Path) -> Result<TraceGraph, Failure> {
    read_trace_file(path).map_err(fail(EXIT_USAGE))
}

fn write(path: &Path, s: &str) -> Result<(), Failure> {
    fs::write(path, s).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn backend(cmd: &Option<String>) -> Result<SolverBackend, Failure> {
    match cmd {
        Some(c) => SolverBackend::from_command(c).map_err(fail(EXIT_USAGE)),
        None => Ok(SolverBackend::from_env()),
    }
}

fn outcome_code(o: &Outcome) -> u8 {
    match o {
        Outcome::Consistent(_) => EXIT_OK,
        Outcome::Inconsistent => EXIT_INCONSISTENT,
        Outcome::Timeout => EXIT_TIMEOUT,
        Outcome::BackendError(_) => EXIT_BACKEND,
    }
}

fn cmd_validate(path: &Path, full: bool, strict: bool) -> Result<u8, Failure> {
    let t = load(path)?;
    let full = full || t.has_rel(crate::Rel::Mo) || t.has_rel(crate::Rel::Eo);
    let opts = ValidateOptions { mode: if full { Mode::Full } else { Mode::Partial }, strict };
    let r = validate(&t, opts);
    if !r.is_ok() {
        println!("{r}");
        return Ok(EXIT_INCONSISTENT);
    }
    if full {
        if let crate::trace::HbResult::Cyclic(c) = hb_acyclic(&t) {
            let names: Vec<&str> = c.iter().map(|&e| t.name(e)).collect();
            println!("happens-before cycle: {}", names.join(" -> "));
            return Ok(EXIT_INCONSISTENT);
        }
    }
    println!("ok: {} events, {} handlers, {} edges", t.num_events(), t.num_handlers(), t.num_edges());
    Ok(EXIT_OK)
}

fn cmd_check(a: &CheckArgs) -> Result<u8, Failure> {
    let mut t = load(&a.trace)?;
    if t.has_rel(crate::Rel::Mo) || t.has_rel(crate::Rel::Eo) {
        warn!("ignoring the mo and eo edges of {}", a.trace.display());
        t = t.to_partial();
    }
    let timeout = a.timeout_ms.map(Duration::from_millis);
    let invalid = |e: crate::trace::ValidationReport| Failure(EXIT_USAGE, format!("invalid trace:\n{e}"));
    let witnesses = match a.algo {
        AlgoArg::Enum => {
            let cfg = EnumConfig { timeout, budget: None, ..Default::default() };
            vec![check_enum_with(&t, &cfg).map_err(invalid)?.outcome]
        }
        AlgoArg::Smt => {
            let cfg = SmtConfig { backend: backend(&a.solver_cmd)?, timeout, fifo: !a.no_fifo };
            vec![check_smt(&t, &cfg).map_err(invalid)?]
        }
        AlgoArg::Nonest => vec![check_nonest(&t).map_err(fail(EXIT_USAGE))?.outcome],
        AlgoArg::Oracle => {
            let cfg = OracleConfig { strict_eo: a.strict_eo, all_witnesses: a.all_witnesses, ..Default::default() };
            match check_oracle(&t, &cfg).map_err(invalid)? {
                OracleResult::Consistent(ws) => ws.into_iter().map(Outcome::Consistent).collect(),
                OracleResult::Inconsistent => vec![Outcome::Inconsistent],
                OracleResult::Refused(why) => return Err(Failure(EXIT_USAGE, format!("oracle refused: {why}"))),
            }
        }
    };
    let first = &witnesses[0];
    match first {
        Outcome::BackendError(e) => eprintln!("solver error: {e}"),
        Outcome::Consistent(_) if witnesses.len() > 1 => println!("consistent ({} witnesses)", witnesses.len()),
        o => println!("{}", o.label()),
    }
    if let (Some(path), Some(_)) = (&a.witness, first.witness()) {
        let docs: Vec<String> =
            witnesses.iter().filter_map(|o| o.witness()).map(|w| witness_to_json(&t, w)).collect();
        let body = if docs.len() == 1 { docs[0].clone() } else { format!("[\n{}]\n", docs.join(",\n")) };
        write(path, &body)?;
    }
    Ok(outcome_code(first))
}

fn cmd_run(a: &RunArgs) -> Result<u8, Failure> {
    let src = fs::read_to_string(&a.program).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", a.program.display())))?;
    let p = parse_program(&src).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", a.program.display())))?;
    fs::create_dir_all(&a.out_dir).map_err(fail(EXIT_USAGE))?;
    let stem = a.program.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string();
    let runs = if a.exhaustive {
        run_exhaustive(&p, a.depth.expect("required by clap"), a.max_steps)
    } else {
        let seed = a.seed.unwrap_or(0);
        (seed..seed + a.count)
            .map(|s| run(&p, &Schedule::Seeded(s), a.max_steps).map_err(fail(EXIT_USAGE)))
            .collect::<Result<_, _>>()?
    };
    for (k, r) in runs.iter().enumerate() {
        let mut t = extract_trace(&p, r);
        if a.partial {
            t = t.to_partial();
        }
        write(&a.out_dir.join(format!("{stem}_{k}.json")), &serialize_trace(&t))?;
    }
    println!("wrote {} trace(s) to {}", runs.len(), a.out_dir.display());
    Ok(EXIT_OK)
}

fn cmd_gadget(cnf: &Path, out: &Path, prov: &Option<PathBuf>) -> Result<u8, Failure> {
    let src = fs::read_to_string(cnf).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", cnf.display())))?;
    let f = parse_dimacs_restricted(&src).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", cnf.display())))?;
    let g = build_gadget(&f);
    write(out, &serialize_trace(&g.trace))?;
    if let Some(p) = prov {
        write(p, &g.provenance_json())?;
    }
    println!("{} events, {} handlers", g.trace.num_events(), g.trace.num_handlers());
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    dir: &Path,
    algos: &[String],
    timeout_ms: u64,
    solver_cmd: &Option<String>,
    csv: &Option<PathBuf>,
    latex: &Option<PathBuf>,
) -> Result<u8, Failure> {
    let algos: Vec<Algo> = algos.iter().map(|s| s.parse()).collect::<Result<_, String>>().map_err(fail(EXIT_USAGE))?;
    let opts = RunOptions { timeout: Duration::from_millis(timeout_ms), backend: backend(solver_cmd)?, fifo: true };
    let report = bench_run(dir, &algos, &opts).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", dir.display())))?;
    match csv {
        Some(p) => write(p, &report.to_csv())?,
        None => print!("{}", report.to_csv()),
    }
    if let Some(p) = latex {
        write(p, &report.to_latex())?;
    }
    Ok(EXIT_OK)
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit code.
pub fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let res = match &cli.cmd {
        Cmd::Validate { trace, full, strict } => cmd_validate(trace, *full, *strict),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Gadget { cnf, out, provenance } => cmd_gadget(cnf, out, provenance),
        Cmd::Bench { dir, algos, timeout_ms, solver_cmd, csv, latex } => {
            cmd_bench(dir, algos, *timeout_ms, solver_cmd, csv, latex)
        }
    };
    match res {
        Ok(c) => c,
        Err(Failure(c, msg)) => {
            eprintln!("edcheck: {msg}");
            c
        }
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    ExitCode::from(run_cli(std::env::args_os()))
}
