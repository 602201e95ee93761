use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use slar_core::backend::BoundedBackend;
use slar_core::optimizer::{disj_formula, well_formed};
use slar_core::pipeline::{decide, RunOptions, Verdict};
use slar_core::semantics::{dom_of, eval_pure, oracle_search, Store};
use slar_core::sorted::{decompose, sorted_count};
use slar_core::syntax::{
    normalize_atom, permutations, Entailment, ExtAtom, ExtTerm, FreeVars, PureFormula, Rel, Sigma, SpatialAtom,
    Substitute, SymbolicHeap, Term, Var,
};
use slar_core::translation::{build_validity_formula, Obligation, TranslateOptions};

const NAMES: [&str; 3] = ["x", "y", "z"];

fn term(max_const: u64) -> impl Strategy<Value = Term> {
    (0..=max_const, proptest::collection::vec((0..NAMES.len(), 0u64..=2), 0..=2)).prop_map(|(c, cs)| {
        cs.into_iter().fold(Term::constant(c), |t, (v, k)| t + Term::var(NAMES[v]).scale(k))
    })
}

fn rel() -> impl Strategy<Value = Rel> {
    prop_oneof![Just(Rel::Eq), Just(Rel::Neq), Just(Rel::Lt), Just(Rel::Le)]
}

fn store() -> impl Strategy<Value = Store> {
    proptest::collection::vec(0u64..=6, NAMES.len())
        .prop_map(|vals| NAMES.iter().zip(vals).map(|(n, v)| (Var::new(n), v)).collect())
}

fn pure_formula() -> impl Strategy<Value = PureFormula> {
    let atom = (rel(), term(3), term(3)).prop_map(|(r, a, b)| PureFormula::atom(r, a, b));
    atom.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 0..3).prop_map(PureFormula::conj),
            proptest::collection::vec(inner.clone(), 0..3).prop_map(PureFormula::disj),
            inner.clone().prop_map(PureFormula::not),
            (0..NAMES.len(), inner.clone()).prop_map(|(v, f)| PureFormula::exists(Var::new(NAMES[v]), f)),
            (0..NAMES.len(), inner).prop_map(|(v, f)| PureFormula::forall(Var::new(NAMES[v]), f)),
        ]
    })
}

fn ground_atom() -> impl Strategy<Value = SpatialAtom> {
    prop_oneof![
        (1u64..=4, 0u64..=2).prop_map(|(a, v)| SpatialAtom::PointsTo(Term::constant(a), Term::constant(v))),
        (1u64..=4, 0u64..=2).prop_map(|(a, l)| SpatialAtom::Arr(Term::constant(a), Term::constant(a + l))),
    ]
}

fn ground_heap(max: usize) -> impl Strategy<Value = SymbolicHeap> {
    proptest::collection::vec(ground_atom(), 0..=max).prop_map(SymbolicHeap::spatial)
}

fn ground_entailment() -> impl Strategy<Value = Entailment> {
    (ground_heap(3), proptest::collection::vec(ground_heap(2), 1..=2)).prop_map(|(a, s)| Entailment::new(a, s))
}

fn symbolic_atom() -> impl Strategy<Value = SpatialAtom> {
    let addr = (0..2usize, 0u64..=3).prop_map(|(v, c)| Term::var(NAMES[v]).offset(c));
    prop_oneof![
        (addr.clone(), 0u64..=2).prop_map(|(a, v)| SpatialAtom::PointsTo(a, Term::constant(v))),
        (addr, 0u64..=2).prop_map(|(a, l)| SpatialAtom::Arr(a.clone(), a.offset(l))),
    ]
}

fn symbolic_sigma(max: usize) -> impl Strategy<Value = Sigma> {
    proptest::collection::vec(symbolic_atom(), 0..=max).prop_map(Sigma::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normalization_preserves_truth(
        r in rel(), lp in term(4), lm in term(4), rp in term(4), rm in term(4), s in store()
    ) {
        let a = ExtAtom::new(r, ExtTerm::new(lp, lm), ExtTerm::new(rp, rm));
        let val = |v: &Var| s.get(v) as i128;
        let direct = r.holds(a.lhs.eval(&val), a.rhs.eval(&val));
        prop_assert_eq!(normalize_atom(&a).eval(&val), direct);
    }

    #[test]
    fn permutation_count_is_factorial(sigma in symbolic_sigma(5)) {
        let phi = SymbolicHeap::new(PureFormula::True, sigma.clone());
        let perms = permutations(&phi);
        let n: usize = (1..=sigma.len()).product();
        prop_assert_eq!(perms.len(), n);
        let mut sorted_atoms = sigma.atoms.clone();
        sorted_atoms.sort();
        for p in &perms {
            let mut atoms = p.spatial.atoms.clone();
            atoms.sort();
            prop_assert_eq!(&atoms, &sorted_atoms);
        }
    }

    #[test]
    fn substitution_free_variable_law(f in pure_formula(), v in 0..NAMES.len(), t in term(2)) {
        let x = Var::new(NAMES[v]);
        let before = f.free_vars();
        let after = f.substitute(&BTreeMap::from([(x.clone(), t.clone())])).free_vars();
        let mut expected: BTreeSet<Var> = before.iter().filter(|w| **w != x).cloned().collect();
        if before.contains(&x) {
            expected.extend(t.vars().cloned());
        }
        prop_assert_eq!(after, expected);
    }

    #[test]
    fn substitution_commutes_with_evaluation(f in pure_formula(), v in 0..NAMES.len(), t in term(2), s in store()) {
        let x = Var::new(NAMES[v]);
        let substituted = f.substitute(&BTreeMap::from([(x.clone(), t.clone())]));
        let updated = s.clone().with(x, s.eval(&t));
        prop_assert_eq!(eval_pure(&s, &substituted, 4), eval_pure(&updated, &f, 4));
    }

    #[test]
    fn disjointness_matches_domains(a in symbolic_atom(), sigma in symbolic_sigma(3), s in store()) {
        let (Some(da), Some(ds)) = (dom_of(&s, &Sigma::new(vec![a.clone()])), dom_of(&s, &sigma)) else {
            return Ok(());
        };
        let per_atom_disjoint = sigma.atoms.iter().all(|b| {
            dom_of(&s, &Sigma::new(vec![b.clone()])).map_or(true, |db| da.is_disjoint(&db))
        });
        prop_assert_eq!(eval_pure(&s, &disj_formula(&a, &sigma), 0), per_atom_disjoint);
        if per_atom_disjoint {
            prop_assert!(da.is_disjoint(&ds));
        }
    }

    #[test]
    fn well_formed_means_a_heap_exists(sigma in symbolic_sigma(3), s in store()) {
        let wf = eval_pure(&s, &well_formed(&sigma), 0);
        let separated = dom_of(&s, &sigma).map_or(false, |d| {
            let cells: usize = sigma.atoms.iter().map(|a| dom_of(&s, &Sigma::new(vec![a.clone()])).map_or(0, |x| x.len())).sum();
            d.len() == cells && !d.contains(&0)
        });
        prop_assert_eq!(wf, separated);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn decomposition_preserves_oracle_verdict(e in ground_entailment()) {
        let whole = oracle_search(&e, 0, 3).is_none();
        let parts = decompose(&e);
        prop_assert_eq!(parts.len(), sorted_count(&e));
        let each = parts.iter().all(|se| oracle_search(&se.to_entailment(), 0, 3).is_none());
        prop_assert_eq!(whole, each);
    }

    #[test]
    fn traces_terminate_within_bounds(e in ground_entailment(), simplify in any::<bool>()) {
        let opts = TranslateOptions { simplify, node_budget: Some(100_000), trace: true };
        for se in decompose(&e) {
            let root = Obligation::from_sorted(&se).measure();
            let (_, tr) = build_validity_formula(&se, &opts).unwrap();
            let trace = tr.trace.unwrap();
            prop_assert!(trace.check().is_ok(), "{:?}", trace.check());
            prop_assert!(trace.nodes[0].measure <= root);
        }
    }

    #[test]
    fn ground_verdicts_agree_with_oracle(e in ground_entailment()) {
        let opts = RunOptions { enable_simplify: true, node_budget: None, ..RunOptions::default() };
        let verdict = decide(&e, &opts, &mut BoundedBackend::new(3)).verdict;
        let counter = oracle_search(&e, 0, 3);
        match verdict {
            Verdict::Valid => prop_assert!(counter.is_none(), "{} has countermodel {:?}", e, counter),
            Verdict::Invalid(_) => prop_assert!(counter.is_some(), "{} refuted without countermodel", e),
            v => prop_assert!(false, "unexpected {:?}", v),
        }
    }
}
