//! Unsatisfiability pruning and the invertible frame rule.

use alloc::vec;
use alloc::vec::Vec;

use crate::backend::{Backend, Query, SatAnswer};
use crate::syntax::{Entailment, LinExpr, PureFormula, Sigma, SpatialAtom, SymbolicHeap, Term};
use crate::translation::size_of;

fn disj_pair(a: &SpatialAtom, b: &SpatialAtom) -> PureFormula {
    use SpatialAtom::*;
    match (a, b) {
        (Emp, _) | (_, Emp) => PureFormula::True,
        (PointsTo(t, _), PointsTo(u, _)) => PureFormula::neq(t.clone(), u.clone()),
        (PointsTo(t, _), Arr(lo, hi)) | (Arr(lo, hi), PointsTo(t, _)) => {
            PureFormula::disj(vec![PureFormula::lt(t.clone(), lo.clone()), PureFormula::lt(hi.clone(), t.clone())])
        }
        (Arr(a, b), Arr(c, d)) => {
            PureFormula::disj(vec![PureFormula::lt(b.clone(), c.clone()), PureFormula::lt(d.clone(), a.clone())])
        }
    }
}

fn conj_or_single(mut parts: Vec<PureFormula>) -> PureFormula {
    match parts.len() {
        0 => PureFormula::True,
        1 => parts.pop().unwrap(),
        _ => PureFormula::conj(parts),
    }
}

/// `Disj(σ, Σ)`: the cells of `σ` are disjoint from those of every atom of `Σ`.
pub fn disj_formula(sigma_atom: &SpatialAtom, sigma: &Sigma) -> PureFormula {
    conj_or_single(
        sigma
            .atoms
            .iter()
            .filter(|a| !a.is_emp())
            .map(|a| disj_pair(sigma_atom, a))
            .collect(),
    )
}

fn atom_well_formed(a: &SpatialAtom) -> Vec<PureFormula> {
    match a {
        SpatialAtom::Emp => vec![],
        SpatialAtom::PointsTo(t, _) => vec![PureFormula::le(1, t.clone())],
        SpatialAtom::Arr(lo, hi) => vec![PureFormula::le(lo.clone(), hi.clone()), PureFormula::le(1, lo.clone())],
    }
}

/// Pairwise disjointness, non-empty arrays and positive addresses: the
/// stores satisfying this are exactly those under which `Σ` has a heap.
pub fn well_formed(sigma: &Sigma) -> PureFormula {
    let atoms: Vec<&SpatialAtom> = sigma.atoms.iter().filter(|a| !a.is_emp()).collect();
    let mut parts = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        for b in &atoms[i + 1..] {
            parts.push(disj_pair(a, b));
        }
    }
    for a in &atoms {
        parts.extend(atom_well_formed(a));
    }
    conj_or_single(parts)
}

/// Removes atoms shared by the antecedent and every succedent, leftmost
/// first, adding their disjointness and well-formedness to the antecedent.
pub fn apply_frame_rule(e: &Entailment) -> (Entailment, usize) {
    let mut e = e.clone();
    let mut removed = 0;
    if e.succedents.is_empty() {
        return (e, 0);
    }
    'scan: loop {
        for k in 0..e.antecedent.spatial.atoms.len() {
            let sigma = &e.antecedent.spatial.atoms[k];
            if sigma.is_emp() {
                continue;
            }
            let bound_free = e
                .succedents
                .iter()
                .all(|s| s.ex_vars.iter().all(|y| !sigma.vars().any(|v| v == y)));
            let positions: Option<Vec<usize>> = e
                .succedents
                .iter()
                .map(|s| s.spatial.atoms.iter().position(|a| a == sigma))
                .collect();
            let (true, Some(positions)) = (bound_free, positions) else { continue };
            let sigma = e.antecedent.spatial.atoms.remove(k);
            for (s, p) in e.succedents.iter_mut().zip(positions) {
                s.spatial.atoms.remove(p);
            }
            let mut extra = vec![disj_formula(&sigma, &e.antecedent.spatial)];
            extra.extend(atom_well_formed(&sigma));
            let mut pure = e.antecedent.pure.clone();
            for f in extra {
                pure = pure.and(f);
            }
            e.antecedent.pure = pure;
            removed += 1;
            continue 'scan;
        }
        return (e, removed);
    }
}

/// The pure encoding of "`φ` has a model".
pub fn model_formula(phi: &SymbolicHeap) -> PureFormula {
    PureFormula::conj(vec![phi.pure.clone(), well_formed(&phi.spatial)])
}

/// True when the solver shows that `phi` has no model. An unknown answer
/// counts as "not shown".
pub fn antecedent_unsat(phi: &SymbolicHeap, backend: &mut dyn Backend) -> bool {
    backend.check_sat(&Query::satisfiable(&model_formula(phi))) == SatAnswer::Unsat
}

/// `l = r` for a signed linear expression `l - r`, as an atom over surface terms.
fn zero_atom(e: &LinExpr) -> PureFormula {
    let mut lhs = Term::constant(e.constant.max(0) as u64);
    let mut rhs = Term::constant((-e.constant).max(0) as u64);
    for (v, c) in &e.coeffs {
        let t = Term::var(v.clone()).scale(c.unsigned_abs() as u64);
        if *c > 0 {
            lhs = lhs + t;
        } else {
            rhs = rhs + t;
        }
    }
    PureFormula::eq(lhs, rhs)
}

/// The joint-satisfiability test used to drop a succedent: both sides have a
/// model under one store, and their footprints have equal size.
pub fn joint_formula(antecedent: &SymbolicHeap, succedent: &SymbolicHeap) -> PureFormula {
    let sizes = size_of(&antecedent.spatial).sub(&size_of(&succedent.spatial));
    PureFormula::conj(vec![
        model_formula(antecedent),
        model_formula(succedent),
        zero_atom(&sizes),
    ])
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PruneLog {
    /// Dropped succedent positions with the formula shown unsatisfiable.
    pub dropped: Vec<(usize, PureFormula)>,
    pub antecedent_unsat: bool,
}

/// Positions of the succedents that survive pruning. Once the backend is
/// interrupted the remaining succedents are kept unchecked.
pub fn prune_succedents(
    antecedent: &SymbolicHeap,
    succedents: &[SymbolicHeap],
    backend: &mut dyn Backend,
) -> (Vec<usize>, PruneLog) {
    let mut kept = Vec::new();
    let mut log = PruneLog::default();
    for (i, s) in succedents.iter().enumerate() {
        if backend.interrupted() {
            kept.push(i);
            continue;
        }
        let f = joint_formula(antecedent, s);
        if backend.check_sat(&Query::satisfiable(&f)) == SatAnswer::Unsat {
            log.dropped.push((i, f));
        } else {
            kept.push(i);
        }
    }
    (kept, log)
}

/// [`prune_succedents`] on a whole entailment.
pub fn prune_entailment(e: &Entailment, backend: &mut dyn Backend) -> (Entailment, PruneLog) {
    let (kept, log) = prune_succedents(&e.antecedent, &e.succedents, backend);
    let succedents = kept.into_iter().map(|i| e.succedents[i].clone()).collect();
    (Entailment::new(e.antecedent.clone(), succedents), log)
}
