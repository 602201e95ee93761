//! Sorted symbolic heaps and the decomposition of an entailment into sorted
//! entailments.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::syntax::{
    permutations, permutations_of, Entailment, ExtTerm, PureFormula, Rel, Sigma, SpatialAtom, Substitute, SymbolicHeap, Term, Var,
};

/// `t < Σ`: `t` is below the first address of `Σ` (true when `Σ` has none).
pub fn lt_sigma<T: Clone + Into<ExtTerm>>(t: &T, sigma: &Sigma<T>) -> PureFormula {
    lt_atoms(t, &sigma.atoms)
}

fn lt_atoms<T: Clone + Into<ExtTerm>>(t: &T, atoms: &[SpatialAtom<T>]) -> PureFormula {
    match atoms.iter().find(|a| !a.is_emp()) {
        None => PureFormula::True,
        Some(SpatialAtom::PointsTo(a, _)) | Some(SpatialAtom::Arr(a, _)) => {
            PureFormula::ext(Rel::Lt, t.clone(), a.clone())
        }
        Some(SpatialAtom::Emp) => unreachable!(),
    }
}

fn sorted_prime<T: Clone + Into<ExtTerm>>(atoms: &[SpatialAtom<T>]) -> PureFormula {
    match atoms.split_first() {
        None => PureFormula::True,
        Some((SpatialAtom::Emp, rest)) => sorted_prime(rest),
        Some((SpatialAtom::PointsTo(t, _), rest)) => PureFormula::conj(alloc::vec![lt_atoms(t, rest), sorted_prime(rest)]),
        Some((SpatialAtom::Arr(t, u), rest)) => PureFormula::conj(alloc::vec![
            PureFormula::ext(Rel::Le, t.clone(), u.clone()),
            lt_atoms(u, rest),
            sorted_prime(rest),
        ]),
    }
}

/// `Sorted(Σ) = 0 < Σ ∧ Sorted'(Σ)`.
pub fn sorted_formula<T: Clone + Into<ExtTerm> + From<Term>>(sigma: &Sigma<T>) -> PureFormula {
    PureFormula::conj(alloc::vec![lt_sigma(&T::from(Term::zero()), sigma), sorted_prime(&sigma.atoms)])
}

/// `φ~`: the pure part extended on the right with `Sorted(Σ)`.
pub fn sorted_heap(phi: &SymbolicHeap) -> SymbolicHeap {
    SymbolicHeap {
        ex_vars: phi.ex_vars.clone(),
        pure: phi.pure.clone().and(sorted_formula(&phi.spatial)),
        spatial: phi.spatial.clone(),
    }
}

/// An entailment whose antecedent and succedents all carry their `Sorted`
/// conjunct.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortedEntailment {
    /// Position in the decomposition order.
    pub index: usize,
    pub antecedent: SymbolicHeap,
    pub succedents: Vec<SymbolicHeap>,
    /// For each succedent, the index of the original succedent it permutes.
    pub origins: Vec<usize>,
}

impl SortedEntailment {
    pub fn to_entailment(&self) -> Entailment {
        Entailment::new(self.antecedent.clone(), self.succedents.clone())
    }

    /// Keeps only the succedents whose position satisfies `keep`.
    pub fn retain_succedents(&mut self, mut keep: impl FnMut(usize) -> bool) {
        let (succ, orig): (Vec<_>, Vec<_>) = core::mem::take(&mut self.succedents)
            .into_iter()
            .zip(core::mem::take(&mut self.origins))
            .enumerate()
            .filter(|(k, _)| keep(*k))
            .map(|(_, p)| p)
            .unzip();
        self.succedents = succ;
        self.origins = orig;
    }
}

/// One sorted entailment per ordering of the antecedent, each with every
/// ordering of every succedent (succedent-major, then permutation order).
///
/// Permuted copies of a succedent get their own existential binders, so no
/// two succedents of a sorted entailment share a bound name.
pub fn decompose(e: &Entailment) -> Vec<SortedEntailment> {
    decompose_iter(e).collect()
}

/// [`decompose`] producing one sorted entailment at a time.
pub fn decompose_iter(e: &Entailment) -> impl Iterator<Item = SortedEntailment> {
    let used = e.all_vars();
    let mut succedents = Vec::new();
    let mut origins = Vec::new();
    for (i, phi) in e.succedents.iter().enumerate() {
        for (j, p) in permutations(phi).into_iter().enumerate() {
            let p = if j == 0 { p } else { rebind(p, j, &used) };
            succedents.push(sorted_heap(&p));
            origins.push(i);
        }
    }
    let antecedent = e.antecedent.clone();
    permutations_of(&antecedent.spatial.atoms)
        .into_iter()
        .enumerate()
        .map(move |(index, atoms)| SortedEntailment {
            index,
            antecedent: sorted_heap(&SymbolicHeap::new(antecedent.pure.clone(), Sigma::new(atoms))),
            succedents: succedents.clone(),
            origins: origins.clone(),
        })
}

/// Number of sorted entailments [`decompose`] yields.
pub fn sorted_count(e: &Entailment) -> usize {
    (1..=e.antecedent.spatial.len()).product()
}

fn rebind(mut phi: SymbolicHeap, copy: usize, used: &BTreeSet<Var>) -> SymbolicHeap {
    if phi.ex_vars.is_empty() {
        return phi;
    }
    let mut bindings = BTreeMap::new();
    for y in phi.ex_vars.iter_mut() {
        let mut n = copy;
        let fresh = loop {
            let cand = Var::new(&format!("{}~{}", y, n));
            if !used.contains(&cand) {
                break cand;
            }
            n += 1;
        };
        bindings.insert(y.clone(), Term::var(fresh.clone()));
        *y = fresh;
    }
    phi.pure = phi.pure.substitute(&bindings);
    phi.spatial = phi.spatial.substitute(&bindings);
    phi
}
