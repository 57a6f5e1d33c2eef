//! Parse a trace, validate it, and print it back in canonical form.

use edcheck::io::{parse_partial_trace, serialize_trace};
use edcheck::trace::{validate, ValidateOptions};

const TRACE: &str = r#"{
  "handlers": ["ui", "worker"],
  "events": [
    {"id": "post_job", "handler": "ui", "kind": "post", "receiver": "worker"},
    {"id": "set_flag", "handler": "ui", "kind": "write", "var": "flag", "val": 1},
    {"id": "job", "handler": "worker", "kind": "get"},
    {"id": "see_flag", "handler": "worker", "kind": "read", "var": "flag"}
  ],
  "edges": [
    {"kind": "po", "src": "post_job", "dst": "set_flag"},
    {"kind": "pb", "src": "post_job", "dst": "job"},
    {"kind": "po", "src": "job", "dst": "see_flag"},
    {"kind": "rf", "src": "set_flag", "dst": "see_flag"}
  ]
}"#;

pub fn run() -> Result<String, Box<dyn std::error::Error>> {
    let t = parse_partial_trace(TRACE.as_bytes())?;
    let report = validate(&t, ValidateOptions::partial());
    println!("validation: {report}");
    if !report.is_ok() {
        return Err(report.to_string().into());
    }

    // Breaking the trace: a read with no writer.
    let mut broken = t.clone();
    broken.remove_edge(edcheck::Rel::Rf, t.event_id("set_flag").unwrap(), t.event_id("see_flag").unwrap());
    println!("without rf: {}", validate(&broken, ValidateOptions::partial()));

    let out = serialize_trace(&t);
    print!("{out}");
    Ok(out)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(drop)
}
