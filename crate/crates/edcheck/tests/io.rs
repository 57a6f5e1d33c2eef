use edcheck::fixtures::{ring_trace, sorting_trace};
use edcheck::gadget::{build_gadget, parse_dimacs_restricted};
use edcheck::io::{parse_partial_trace, parse_trace, parse_witness, read_trace_file, serialize_trace, witness_to_json};
use edcheck::smt::{check_smt, SmtConfig};

#[test]
fn fixtures_round_trip_through_files() {
    let d = tempfile::tempdir().unwrap();
    let f = parse_dimacs_restricted("p cnf 3 2\n1 2 -3 0\n-1 3 0\n").unwrap();
    for (name, t) in [
        ("sorting", sorting_trace([2, 3, 1])),
        ("ring", ring_trace(33)),
        ("gadget", build_gadget(&f).trace),
    ] {
        let path = d.path().join(format!("{name}.json"));
        let s = serialize_trace(&t);
        std::fs::write(&path, &s).unwrap();
        let back = read_trace_file(&path).unwrap();
        assert_eq!(serialize_trace(&back), s, "{name}");
        assert!(parse_partial_trace(s.as_bytes()).is_ok(), "{name}");
    }
}

#[test]
fn witnesses_round_trip() {
    let t = sorting_trace([1, 2, 3]);
    let w = check_smt(&t, &SmtConfig::default()).unwrap().witness().unwrap().clone();
    let json = witness_to_json(&t, &w);
    let back = parse_witness(&t, json.as_bytes()).unwrap();
    assert_eq!(back, w);
    assert!(back.check(&t).is_ok());
}

#[test]
fn errors_name_the_offending_element() {
    let cases = [
        (r#"{"handlers": ["h"], "events": [], "edges": [], "extra": 1}"#, "extra"),
        (r#"{"handlers": ["h", "h"], "events": [], "edges": []}"#, "handlers[1]"),
        (r#"{"handlers": ["h"], "events": [{"id": "a", "handler": "g", "kind": "get"}], "edges": []}"#, "unknown handler 'g'"),
        (r#"{"handlers": ["h"], "events": [{"id": "a", "handler": "h", "kind": "read"}], "edges": []}"#, "fields do not match"),
        (r#"{"handlers": ["h"], "events": [], "edges": [{"kind": "po", "src": "a", "dst": "b"}]}"#, "unknown event 'a'"),
        ("[", "malformed JSON"),
    ];
    for (src, needle) in cases {
        let e = parse_trace(src.as_bytes()).unwrap_err().to_string();
        assert!(e.contains(needle), "{src}: {e}");
    }
}
