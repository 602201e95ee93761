use std::time::{Duration, Instant};

use proptest::prelude::*;

use slar::solver::{run_solver, ConfigError, RunError, SolverBackend, SolverConfig};
use slar_core::backend::{bounded_eval, decide_validity, emit_smtlib, Backend, BackendVerdict, Query, UnknownReason};
use slar_core::syntax::{PureFormula as F, Rel, Term, Var};
use slar_core::translation::ClosedFormula;

fn solver() -> Option<SolverConfig> {
    let cfg = SolverConfig::from_env();
    match cfg.validate() {
        Ok(_) => Some(cfg),
        Err(e) => {
            eprintln!("skipping: {}", e);
            None
        }
    }
}

fn x() -> Term {
    Term::var("x")
}

#[test]
fn trivially_unsat_script() {
    let Some(cfg) = solver() else { return };
    let out = run_solver("(set-logic LIA)\n(assert (< 1 0))\n(check-sat)\n", &cfg).unwrap();
    assert_eq!(out.split_whitespace().next(), Some("unsat"));
}

#[test]
fn tiny_timeout_kills_the_solver() {
    let Some(mut cfg) = solver() else { return };
    cfg.timeout_ms = 1;
    let f = ClosedFormula {
        universal: (0..8).map(|i| Var::new(&format!("a{}", i))).collect(),
        existential: vec![Var::new("b")],
        body: F::conj((0..8).map(|i| F::lt(format!("a{}", i).as_str(), Term::var("b").scale(3))).collect()),
    };
    let start = Instant::now();
    assert!(matches!(run_solver(&emit_smtlib(&f), &cfg), Err(RunError::Timeout)));
    assert!(start.elapsed() < Duration::from_secs(2));
}

#[test]
fn missing_executable_is_a_configuration_error() {
    let cfg = SolverConfig::new("/nonexistent/bin/z3");
    assert!(matches!(run_solver("(check-sat)", &cfg), Err(RunError::Config(ConfigError::NotFound(_)))));
    assert!(SolverBackend::new(cfg).is_err());
}

#[test]
fn validity_examples() {
    let Some(cfg) = solver() else { return };
    for persistent in [true, false] {
        let mut b = SolverBackend::new(SolverConfig { persistent, ..cfg.clone() }).unwrap();
        let succ = ClosedFormula::universal_closure(F::implies(F::le(0, x()), F::lt(0, x().offset(1))));
        assert_eq!(decide_validity(&mut b, &succ), BackendVerdict::Valid);
        let next = ClosedFormula {
            universal: vec![Var::new("x")],
            existential: vec![Var::new("y")],
            body: F::eq("y", x().offset(1)),
        };
        assert_eq!(decide_validity(&mut b, &next), BackendVerdict::Valid);
        let pred = ClosedFormula {
            universal: vec![Var::new("x")],
            existential: vec![Var::new("y")],
            body: F::eq(Term::var("y").offset(1), x()),
        };
        assert_eq!(decide_validity(&mut b, &pred), BackendVerdict::Invalid);
        let contradiction = ClosedFormula::universal_closure(F::not(F::eq(x(), x())));
        assert_eq!(decide_validity(&mut b, &contradiction), BackendVerdict::Invalid);
        assert_eq!(b.calls, 4);
    }
}

#[test]
fn session_recovers_after_a_timeout() {
    let Some(cfg) = solver() else { return };
    let mut b = SolverBackend::new(cfg).unwrap();
    let valid = ClosedFormula::ground(F::lt(1, 2));
    assert_eq!(decide_validity(&mut b, &valid), BackendVerdict::Valid);
    b.set_deadline(Some(Instant::now()));
    assert!(b.interrupted());
    assert_eq!(decide_validity(&mut b, &valid), BackendVerdict::Unknown(UnknownReason::Timeout));
    b.set_deadline(None);
    assert!(!b.interrupted());
    assert_eq!(decide_validity(&mut b, &valid), BackendVerdict::Valid);
}

#[test]
fn solver_errors_are_unknown() {
    let Some(cfg) = solver() else { return };
    let mut b = SolverBackend::new(cfg).unwrap();
    let q = Query {
        declared: vec![],
        assertion: F::True,
        script: "(assert (foo))\n(check-sat)\n".into(),
    };
    assert!(matches!(b.check_sat(&q), slar_core::backend::SatAnswer::Unknown(UnknownReason::SolverError(_))));
    assert_eq!(decide_validity(&mut b, &ClosedFormula::ground(F::True)), BackendVerdict::Valid);
}

#[test]
fn scripts_are_dumped() {
    let Some(mut cfg) = solver() else { return };
    let dir = tempfile::tempdir().unwrap();
    cfg.dump_dir = Some(dir.path().join("smt"));
    let mut b = SolverBackend::new(cfg).unwrap();
    let f = ClosedFormula::ground(F::lt(1, 2));
    decide_validity(&mut b, &f);
    decide_validity(&mut b, &f);
    let mut names: Vec<_> = std::fs::read_dir(dir.path().join("smt"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["query-000000.smt2", "query-000001.smt2"]);
    let text = std::fs::read_to_string(dir.path().join("smt/query-000000.smt2")).unwrap();
    assert_eq!(text, emit_smtlib(&f));
}

fn ground_formula() -> impl Strategy<Value = F> {
    let rel = prop_oneof![Just(Rel::Eq), Just(Rel::Neq), Just(Rel::Lt), Just(Rel::Le)];
    let atom = (rel, 0u64..5, 0u64..5).prop_map(|(r, a, b)| F::atom(r, a, b));
    atom.prop_recursive(3, 10, 3, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 0..3).prop_map(F::conj),
            proptest::collection::vec(inner.clone(), 0..3).prop_map(F::disj),
            inner.clone().prop_map(F::not),
            (inner.clone(), inner).prop_map(|(a, b)| F::implies(a, b)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn ground_round_trip_and_duality(f in ground_formula()) {
        let Some(cfg) = solver() else { return Ok(()) };
        let mut b = SolverBackend::new(cfg).unwrap();
        let pos = ClosedFormula::ground(f.clone());
        let neg = ClosedFormula::ground(F::not(f));
        let expected = if bounded_eval(&pos, 0) { BackendVerdict::Valid } else { BackendVerdict::Invalid };
        prop_assert_eq!(decide_validity(&mut b, &pos), expected.clone());
        let dual = if expected == BackendVerdict::Valid { BackendVerdict::Invalid } else { BackendVerdict::Valid };
        prop_assert_eq!(decide_validity(&mut b, &neg), dual);
        prop_assert_eq!(emit_smtlib(&pos), emit_smtlib(&pos.clone()));
    }
}
