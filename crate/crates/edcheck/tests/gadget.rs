use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use edcheck::gadget::{
    build_gadget, decode_assignment, parse_dimacs_restricted, random_cnf, sat_bruteforce, sat_bruteforce_gray,
    SatResult, HANDLERS,
};
use edcheck::oracle::{check_oracle, OracleConfig, OracleResult};
use edcheck::smt::{check_smt, SmtConfig};
use edcheck::trace::{validate, ValidateOptions};
use edcheck::Outcome;

// Unsatisfiable with every variable in at most three clauses.
const UNSAT: &str = "p cnf 4 5\n-1 2 0\n1 3 0\n-2 4 0\n1 -3 0\n-2 -4 0\n";

#[test]
fn single_clause_is_consistent_for_the_oracle() {
    let f = parse_dimacs_restricted("p cnf 2 1\n1 2 0\n").unwrap();
    let g = build_gadget(&f);
    let OracleResult::Consistent(ws) = check_oracle(&g.trace, &OracleConfig::default()).unwrap() else {
        panic!("expected consistent")
    };
    let a = decode_assignment(&g, &ws[0]).unwrap();
    assert!(f.satisfied_by(&a));
}

#[test]
fn unsatisfiable_formula_gives_an_inconsistent_trace() {
    let f = parse_dimacs_restricted(UNSAT).unwrap();
    assert_eq!(sat_bruteforce(&f).unwrap(), SatResult::Unsat);
    let g = build_gadget(&f);
    assert_eq!(check_smt(&g.trace, &SmtConfig::default()).unwrap(), Outcome::Inconsistent);
}

#[test]
fn traces_are_well_formed_and_fully_annotated() {
    let f = parse_dimacs_restricted(UNSAT).unwrap();
    let g = build_gadget(&f);
    assert!(validate(&g.trace, ValidateOptions::partial()).is_ok());
    assert_eq!(g.trace.handlers(), HANDLERS);
    assert!(g.trace.handler_id("h_W").is_some());
    assert_eq!(g.provenance.len(), g.trace.num_events());
    for e in g.trace.events() {
        assert!(g.provenance.contains_key(&e.name), "{}", e.name);
    }
    let json: serde_json::Value = serde_json::from_str(&g.provenance_json()).unwrap();
    assert_eq!(json.as_object().unwrap().len(), g.trace.num_events());
}

#[test]
fn bad_formulas_are_rejected() {
    for (src, needle) in [
        ("p cnf 1 3\n1 0\n1 0\n1 0\n", "clause"),
        ("p cnf 1 1\n1 -1 0\n", "at most once per clause"),
        ("p cnf 2 4\n1 2 0\n-1 2 0\n1 -2 0\n-1 -2 0\n", "1"),
        ("p cnf 1 1\n2 0\n", "clause"),
        ("1 2 0\n", "line"),
    ] {
        let e = parse_dimacs_restricted(src).unwrap_err().to_string();
        assert!(e.contains(needle), "{src:?}: {e}");
    }
}

proptest! {
    #[test]
    fn brute_force_orders_agree(seed in any::<u64>(), n in 1usize..8, m in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(f) = random_cnf(&mut rng, n, m) {
            let a = sat_bruteforce(&f).unwrap();
            let b = sat_bruteforce_gray(&f).unwrap();
            prop_assert_eq!(matches!(a, SatResult::Sat(_)), matches!(b, SatResult::Sat(_)));
            for r in [a, b] {
                if let SatResult::Sat(x) = r {
                    prop_assert!(f.satisfied_by(&x));
                }
            }
        }
    }
}
