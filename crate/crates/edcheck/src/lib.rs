//! Consistency checking for partial traces of event-driven programs.
//!
//! A partial trace fixes program order, reads-from, coherence and posted-by;
//! the checkers decide whether mailbox order (`mo`) and execution order
//! (`eo`) can be completed so that happens-before is acyclic.
//!
//! - [`enumerate`]: saturation plus enumeration of mailbox orders.
//! - [`smt`]: timestamp encoding in SMT-LIB (QF_IDL), solved out of process.
//! - [`nonest`]: polynomial search for traces without nested posts.
//! - [`oracle`]: brute force, the reference for everything else.
//! - [`interp`]: runs `.edp` programs and extracts the traces they induce.
//! - [`gadget`]: the 3-BI-3SAT hardness construction.

pub mod analysis;
pub mod bench;
pub mod cli;
pub mod enumerate;
pub mod fixtures;
pub mod gadget;
pub mod gen;
pub mod interp;
pub mod io;
pub mod nonest;
pub mod oracle;
pub mod program;
pub mod samples;
pub mod smt;
pub mod trace;

use std::time::Duration;

pub use trace::{EventId, EventKind, HandlerId, Rel, TraceGraph, Witness};

/// Verdict of a consistency check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Consistent(Witness),
    Inconsistent,
    Timeout,
    BackendError(String),
}

impl Outcome {
    pub fn verdict(&self) -> Option<bool> {
        match self {
            Outcome::Consistent(_) => Some(true),
            Outcome::Inconsistent => Some(false),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Consistent(_) => "consistent",
            Outcome::Inconsistent => "inconsistent",
            Outcome::Timeout => "timeout",
            Outcome::BackendError(_) => "backend-error",
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Outcome::Consistent(w) => Some(w),
            _ => None,
        }
    }
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
