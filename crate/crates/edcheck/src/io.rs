//! JSON trace and witness files.
//!
//! Serialization is canonical: handlers and events in construction order,
//! edges sorted by `(kind, src, dst)` on their string forms, one element per
//! line.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::trace::{EventKind, Rel, TraceGraph, Witness};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{at}: {msg}")]
    Bad { at: String, msg: String },
}

fn bad(at: impl Into<String>, msg: impl Into<String>) -> IoError {
    IoError::Bad { at: at.into(), msg: msg.into() }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrace {
    handlers: Vec<String>,
    events: Vec<RawEvent>,
    edges: Vec<RawEdge>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    id: String,
    handler: String,
    kind: String,
    var: Option<String>,
    val: Option<i64>,
    receiver: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    kind: String,
    src: String,
    dst: String,
}

/// Parses a trace file without semantic validation.
pub fn parse_trace(bytes: &[u8]) -> Result<TraceGraph, IoError> {
    parse_inner(bytes, false)
}

/// Like [`parse_trace`], but rejects `mo` and `eo` edges.
pub fn parse_partial_trace(bytes: &[u8]) -> Result<TraceGraph, IoError> {
    parse_inner(bytes, true)
}

fn parse_inner(bytes: &[u8], partial_only: bool) -> Result<TraceGraph, IoError> {
    let raw: RawTrace = serde_json::from_slice(bytes)?;
    let mut t = TraceGraph::new();
    for (i, h) in raw.handlers.iter().enumerate() {
        t.add_handler(h).map_err(|e| bad(format!("handlers[{i}]"), e.to_string()))?;
    }
    let handler = |at: &str, name: &str, t: &TraceGraph| {
        t.handler_id(name).ok_or_else(|| bad(at, format!("unknown handler '{name}'")))
    };
    for (i, e) in raw.events.into_iter().enumerate() {
        let at = format!("events[{i}] (id '{}')", e.id);
        let h = handler(&at, &e.handler, &t)?;
        let fields = (e.var.is_some(), e.val.is_some(), e.receiver.is_some());
        let kind = match (e.kind.as_str(), fields) {
            ("write", (true, true, false)) => {
                EventKind::Write { var: e.var.unwrap(), val: e.val.unwrap() }
            }
            ("read", (true, false, false)) => EventKind::Read { var: e.var.unwrap() },
            ("post", (false, false, true)) => {
                EventKind::Post { receiver: handler(&at, e.receiver.as_deref().unwrap(), &t)? }
            }
            ("get", (false, false, false)) => EventKind::Get,
            ("write" | "read" | "post" | "get", _) => {
                return Err(bad(at, format!("fields do not match event kind '{}'", e.kind)))
            }
            (k, _) => return Err(bad(at, format!("unknown event kind '{k}'"))),
        };
        t.add_event(&e.id, h, kind).map_err(|err| bad(&at, err.to_string()))?;
    }
    for (i, e) in raw.edges.iter().enumerate() {
        let at = format!("edges[{i}]");
        let rel = Rel::from_name(&e.kind)
            .ok_or_else(|| bad(&at, format!("unknown edge kind '{}'", e.kind)))?;
        if partial_only && rel.is_guessable() {
            return Err(bad(&at, format!("{rel} edges are not allowed in a partial trace")));
        }
        let id = |s: &str| t.event_id(s).ok_or_else(|| bad(&at, format!("unknown event '{s}'")));
        let (src, dst) = (id(&e.src)?, id(&e.dst)?);
        t.add_edge(rel, src, dst);
    }
    Ok(t)
}

fn js(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

pub fn serialize_trace(t: &TraceGraph) -> String {
    let handlers: Vec<String> = t.handlers().iter().map(|h| js(h)).collect();
    let events: Vec<String> = t
        .events()
        .iter()
        .map(|e| {
            let mut s = format!(
                "{{\"id\": {}, \"handler\": {}, \"kind\": \"{}\"",
                js(&e.name),
                js(&t.handlers()[e.handler]),
                e.kind.name()
            );
            match &e.kind {
                EventKind::Write { var, val } => s += &format!(", \"var\": {}, \"val\": {val}", js(var)),
                EventKind::Read { var } => s += &format!(", \"var\": {}", js(var)),
                EventKind::Post { receiver } => {
                    s += &format!(", \"receiver\": {}", js(&t.handlers()[*receiver]))
                }
                EventKind::Get => {}
            }
            s + "}"
        })
        .collect();
    let mut edges: Vec<(&str, &str, &str)> =
        t.edges().map(|e| (e.rel.name(), t.name(e.src), t.name(e.dst))).collect();
    edges.sort();
    let edges: Vec<String> = edges
        .into_iter()
        .map(|(k, s, d)| format!("{{\"kind\": \"{k}\", \"src\": {}, \"dst\": {}}}", js(s), js(d)))
        .collect();
    let block = |items: Vec<String>| {
        if items.is_empty() {
            "[]".to_string()
        } else {
            format!("[\n  {}\n]", items.join(",\n  "))
        }
    };
    format!(
        "{{\"handlers\": [{}], \"events\": {}, \"edges\": {}}}\n",
        handlers.join(", "),
        block(events),
        block(edges)
    )
}

pub fn read_trace_file(path: &Path) -> Result<TraceGraph, IoError> {
    let bytes = fs::read(path).map_err(|source| IoError::Read { path: path.display().to_string(), source })?;
    parse_trace(&bytes)
}

pub fn witness_to_json(t: &TraceGraph, w: &Witness) -> String {
    let names = |v: &[usize]| Value::Array(v.iter().map(|&e| Value::from(t.name(e))).collect());
    let map = |m: &BTreeMap<usize, Vec<usize>>| {
        let mut out = Map::new();
        for (&h, v) in m {
            out.insert(t.handlers()[h].clone(), names(v));
        }
        Value::Object(out)
    };
    let mut doc = Map::new();
    doc.insert("mo".into(), map(&w.mo));
    doc.insert("eo".into(), map(&w.eo));
    doc.insert("linearization".into(), names(&w.linearization));
    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("json");
    s.push('\n');
    s
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWitness {
    mo: BTreeMap<String, Vec<String>>,
    eo: BTreeMap<String, Vec<String>>,
    linearization: Vec<String>,
}

/// Parses a witness file, resolving ids against `t`.
pub fn parse_witness(t: &TraceGraph, bytes: &[u8]) -> Result<Witness, IoError> {
    let raw: RawWitness = serde_json::from_slice(bytes)?;
    let ev = |s: &String| t.event_id(s).ok_or_else(|| bad("witness", format!("unknown event '{s}'")));
    let map = |m: BTreeMap<String, Vec<String>>| -> Result<BTreeMap<usize, Vec<usize>>, IoError> {
        let mut out = BTreeMap::new();
        for (h, v) in m {
            let hid = t.handler_id(&h).ok_or_else(|| bad("witness", format!("unknown handler '{h}'")))?;
            out.insert(hid, v.iter().map(ev).collect::<Result<_, _>>()?);
        }
        Ok(out)
    };
    Ok(Witness {
        mo: map(raw.mo)?,
        eo: map(raw.eo)?,
        linearization: raw.linearization.iter().map(ev).collect::<Result<_, _>>()?,
    })
}
