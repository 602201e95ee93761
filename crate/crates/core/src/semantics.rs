//! Heap-model semantics and the bounded countermodel search used as ground
//! truth in tests.
//!
//! Values are naturals, addresses are positive naturals. Quantifiers inside
//! pure formulas and the existential prefix of a symbolic heap are evaluated
//! over `0..=bound`, so results are exact only for quantifier-free input.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::syntax::{Entailment, FreeVars, PureFormula, Sigma, SpatialAtom, SymbolicHeap, Term, Var};

/// Valuation of variables; absent variables are 0.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Store {
    values: BTreeMap<Var, u64>,
}

impl Store {
    pub fn new() -> Self {
        Store::default()
    }

    pub fn get(&self, v: &Var) -> u64 {
        self.values.get(v).copied().unwrap_or(0)
    }

    pub fn set(&mut self, v: Var, value: u64) {
        self.values.insert(v, value);
    }

    pub fn with(mut self, v: impl Into<Var>, value: u64) -> Self {
        self.set(v.into(), value);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, u64)> {
        self.values.iter().map(|(v, n)| (v, *n))
    }

    pub fn eval(&self, t: &Term) -> u64 {
        t.eval(&|v| self.get(v) as i128) as u64
    }
}

impl FromIterator<(Var, u64)> for Store {
    fn from_iter<I: IntoIterator<Item = (Var, u64)>>(iter: I) -> Self {
        Store {
            values: iter.into_iter().collect(),
        }
    }
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, n)) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{} = {}", v, n)?;
        }
        f.write_str("}")
    }
}

/// Finite map from positive addresses to values.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Heap {
    cells: BTreeMap<u64, u64>,
}

impl Heap {
    pub fn new() -> Self {
        Heap::default()
    }

    /// Panics on address 0, which is not a location.
    pub fn insert(&mut self, addr: u64, value: u64) {
        assert!(addr != 0, "address 0 is not a heap location");
        self.cells.insert(addr, value);
    }

    pub fn with(mut self, addr: u64, value: u64) -> Self {
        self.insert(addr, value);
        self
    }

    pub fn get(&self, addr: u64) -> Option<u64> {
        self.cells.get(&addr).copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn domain(&self) -> BTreeSet<u64> {
        self.cells.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.cells.iter().map(|(a, v)| (*a, *v))
    }

    /// Restriction to the given addresses.
    pub fn restrict(&self, dom: &BTreeSet<u64>) -> Heap {
        Heap {
            cells: self.cells.iter().filter(|(a, _)| dom.contains(a)).map(|(a, v)| (*a, *v)).collect(),
        }
    }
}

impl FromIterator<(u64, u64)> for Heap {
    fn from_iter<I: IntoIterator<Item = (u64, u64)>>(iter: I) -> Self {
        let mut h = Heap::new();
        for (a, v) in iter {
            h.insert(a, v);
        }
        h
    }
}

impl fmt::Debug for Heap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Heap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (a, v)) in self.cells.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{} -> {}", a, v)?;
        }
        f.write_str("}")
    }
}

/// A store and heap satisfying the antecedent of an entailment and none of
/// its succedents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Countermodel {
    pub store: Store,
    pub heap: Heap,
}

impl fmt::Display for Countermodel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "store {} heap {}", self.store, self.heap)
    }
}

/// Variable lookup with a stack of local bindings over a store.
struct Env<'a> {
    store: &'a Store,
    locals: Vec<(Var, u64)>,
}

impl Env<'_> {
    fn value(&self, v: &Var) -> i128 {
        self.locals
            .iter()
            .rev()
            .find(|(w, _)| w == v)
            .map(|(_, n)| *n as i128)
            .unwrap_or_else(|| self.store.get(v) as i128)
    }

    fn eval_term(&self, t: &Term) -> i128 {
        t.eval(&|v| self.value(v))
    }

    fn eval(&mut self, f: &PureFormula, bound: u64) -> bool {
        match f {
            PureFormula::True => true,
            PureFormula::False => false,
            PureFormula::Atom(a) => a.rel.holds(self.eval_term(&a.lhs), self.eval_term(&a.rhs)),
            PureFormula::And(cs) => cs.iter().all(|c| self.eval(c, bound)),
            PureFormula::Or(cs) => cs.iter().any(|c| self.eval(c, bound)),
            PureFormula::Not(g) => !self.eval(g, bound),
            PureFormula::Implies(a, b) => !self.eval(a, bound) || self.eval(b, bound),
            PureFormula::Exists(v, g) => (0..=bound).any(|n| self.with_local(v, n, |env| env.eval(g, bound))),
            PureFormula::Forall(v, g) => (0..=bound).all(|n| self.with_local(v, n, |env| env.eval(g, bound))),
        }
    }

    fn with_local<R>(&mut self, v: &Var, n: u64, k: impl FnOnce(&mut Self) -> R) -> R {
        self.locals.push((v.clone(), n));
        let r = k(self);
        self.locals.pop();
        r
    }
}

/// Evaluate a pure formula, quantifiers ranging over `0..=bound`.
pub fn eval_pure(s: &Store, f: &PureFormula, bound: u64) -> bool {
    Env {
        store: s,
        locals: Vec::new(),
    }
    .eval(f, bound)
}

/// Memory footprint of a spatial formula: one interval per non-emp atom plus
/// the values required by points-to atoms. `None` when some array has an
/// empty range.
struct Footprint {
    intervals: Vec<(u64, u64)>,
    values: Vec<(u64, u64)>,
}

fn footprint(s: &Store, sigma: &Sigma) -> Option<Footprint> {
    let mut fp = Footprint {
        intervals: Vec::new(),
        values: Vec::new(),
    };
    for a in &sigma.atoms {
        match a {
            SpatialAtom::Emp => {}
            SpatialAtom::PointsTo(t, u) => {
                let addr = s.eval(t);
                fp.intervals.push((addr, addr));
                fp.values.push((addr, s.eval(u)));
            }
            SpatialAtom::Arr(t, u) => {
                let (lo, hi) = (s.eval(t), s.eval(u));
                if lo > hi {
                    return None;
                }
                fp.intervals.push((lo, hi));
            }
        }
    }
    Some(fp)
}

impl Footprint {
    /// True when intervals are pairwise disjoint and avoid address 0.
    fn is_separated(&self) -> bool {
        let mut iv = self.intervals.clone();
        iv.sort_unstable();
        iv.iter().all(|(lo, _)| *lo > 0) && iv.windows(2).all(|w| w[0].1 < w[1].0)
    }

    fn cell_count(&self) -> u64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo + 1).sum()
    }
}

/// `Dom(s, Σ)`, or `None` when some array range is empty.
pub fn dom_of(s: &Store, sigma: &Sigma) -> Option<BTreeSet<u64>> {
    let fp = footprint(s, sigma)?;
    Some(fp.intervals.iter().flat_map(|(lo, hi)| *lo..=*hi).collect())
}

/// `s, h ⊨ Σ`
pub fn sat_spatial(s: &Store, h: &Heap, sigma: &Sigma) -> bool {
    let Some(fp) = footprint(s, sigma) else {
        return false;
    };
    if !fp.is_separated() || fp.cell_count() != h.len() as u64 {
        return false;
    }
    let covered = fp
        .intervals
        .iter()
        .all(|(lo, hi)| h.cells.range(*lo..=*hi).count() as u64 == hi - lo + 1);
    covered && fp.values.iter().all(|(a, v)| h.get(*a) == Some(*v))
}

/// `s, h ⊨ φ`, with the existential prefix and pure quantifiers ranging over
/// `0..=quant_bound`.
pub fn sat_qf(s: &Store, h: &Heap, phi: &SymbolicHeap, quant_bound: u64) -> bool {
    if phi.ex_vars.is_empty() {
        return eval_pure(s, &phi.pure, quant_bound) && sat_spatial(s, h, &phi.spatial);
    }
    Odometer::new(phi.ex_vars.len(), quant_bound).any(|vals| {
        let mut ext = s.clone();
        for (v, n) in phi.ex_vars.iter().zip(vals.iter()) {
            ext.set(v.clone(), *n);
        }
        eval_pure(&ext, &phi.pure, quant_bound) && sat_spatial(&ext, h, &phi.spatial)
    })
}


/// Enumerates `{0..=bound}^len` in lexicographic order (last position fastest).
pub struct Odometer {
    next: Option<Vec<u64>>,
    bound: u64,
}

impl Odometer {
    pub fn new(len: usize, bound: u64) -> Self {
        Odometer {
            next: Some(vec![0; len]),
            bound,
        }
    }
}

impl Iterator for Odometer {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for i in (0..succ.len()).rev() {
            if succ[i] < self.bound {
                succ[i] += 1;
                succ[i + 1..].iter_mut().for_each(|d| *d = 0);
                self.next = Some(succ);
                break;
            }
        }
        Some(current)
    }
}

/// Cells of the antecedent heap: values forced by points-to atoms and the
/// array cells whose contents are free.
struct Layout {
    domain: BTreeSet<u64>,
    forced: BTreeMap<u64, u64>,
    free: Vec<u64>,
}

fn antecedent_layout(s: &Store, sigma: &Sigma) -> Option<Layout> {
    let fp = footprint(s, sigma)?;
    if !fp.is_separated() {
        return None;
    }
    let forced: BTreeMap<u64, u64> = fp.values.iter().copied().collect();
    let domain: BTreeSet<u64> = fp.intervals.iter().flat_map(|(lo, hi)| *lo..=*hi).collect();
    let free = domain.iter().copied().filter(|a| !forced.contains_key(a)).collect();
    Some(Layout { domain, forced, free })
}

/// Constraints a succedent places on the free cells for one choice of its
/// existential variables: `(address, value)` pairs sorted by address.
type Cube = Vec<(u64, u64)>;

fn succedent_cube(s: &Store, phi: &SymbolicHeap, layout: &Layout, value_bound: u64, quant_bound: u64) -> Option<Cube> {
    if !eval_pure(s, &phi.pure, quant_bound) {
        return None;
    }
    let fp = footprint(s, &phi.spatial)?;
    if !fp.is_separated() || fp.cell_count() != layout.domain.len() as u64 {
        return None;
    }
    if !fp.intervals.iter().all(|(lo, hi)| layout.domain.range(*lo..=*hi).count() as u64 == hi - lo + 1) {
        return None;
    }
    let mut cube = Vec::new();
    for (addr, v) in fp.values {
        match layout.forced.get(&addr) {
            Some(w) if *w != v => return None,
            Some(_) => {}
            None if v > value_bound => return None,
            None => cube.push((addr, v)),
        }
    }
    cube.sort_unstable();
    Some(cube)
}

/// Lexicographically smallest assignment to `cells` (values in
/// `0..=value_bound`) that satisfies no cube, if any.
fn uncovered_assignment(cells: &[u64], cubes: Vec<Cube>, value_bound: u64, acc: &mut Vec<u64>) -> bool {
    if cubes.iter().any(|c| c.is_empty()) {
        return false;
    }
    if cubes.is_empty() {
        acc.resize(cells.len(), 0);
        return true;
    }
    let cell = cells[acc.len()];
    let mentioned: BTreeSet<u64> = cubes
        .iter()
        .filter_map(|c| c.iter().find(|(a, _)| *a == cell).map(|(_, v)| *v))
        .collect();
    let mut candidates: Vec<u64> = mentioned.iter().copied().collect();
    // One representative stands for every unmentioned value.
    if let Some(rep) = (0..=value_bound).find(|v| !mentioned.contains(v)) {
        candidates.push(rep);
        candidates.sort_unstable();
    }
    for v in candidates {
        let next: Vec<Cube> = cubes
            .iter()
            .filter_map(|c| match c.iter().position(|(a, _)| *a == cell) {
                Some(i) if c[i].1 == v => {
                    let mut c = c.clone();
                    c.remove(i);
                    Some(c)
                }
                Some(_) => None,
                None => Some(c.clone()),
            })
            .collect();
        acc.push(v);
        if uncovered_assignment(cells, next, value_bound, acc) {
            return true;
        }
        acc.pop();
    }
    false
}

/// Bounded search for a countermodel.
///
/// Stores range over `0..=store_bound` on the free variables of `e`; for each
/// store satisfying the antecedent, heaps range over the antecedent's
/// footprint with array cells in `0..=value_bound`. Succedents are evaluated
/// with quantifiers bounded by `max(store_bound, value_bound)`. The first
/// countermodel in enumeration order is returned (stores, then heaps, both
/// lexicographic).
///
/// The heap enumeration is done symbolically: each succedent and choice of its
/// existential variables fixes some free cells, and a countermodel is an
/// assignment escaping all of these constraints. This visits the same search
/// space as plain enumeration.
pub fn oracle_search(e: &Entailment, store_bound: u64, value_bound: u64) -> Option<Countermodel> {
    let vars: Vec<Var> = e.free_vars().into_iter().collect();
    let quant_bound = store_bound.max(value_bound);
    for vals in Odometer::new(vars.len(), store_bound) {
        let store: Store = vars.iter().cloned().zip(vals).collect();
        if let Some(cm) = countermodel_at(e, &store, value_bound, quant_bound) {
            return Some(cm);
        }
    }
    None
}

/// Countermodel search with the store fixed.
pub fn countermodel_at(e: &Entailment, store: &Store, value_bound: u64, quant_bound: u64) -> Option<Countermodel> {
    let ant = &e.antecedent;
    if !eval_pure(store, &ant.pure, quant_bound) {
        return None;
    }
    let layout = antecedent_layout(store, &ant.spatial)?;
    let mut cubes = Vec::new();
    for phi in &e.succedents {
        for ys in Odometer::new(phi.ex_vars.len(), quant_bound) {
            let mut ext = store.clone();
            for (v, n) in phi.ex_vars.iter().zip(ys) {
                ext.set(v.clone(), n);
            }
            if let Some(c) = succedent_cube(&ext, phi, &layout, value_bound, quant_bound) {
                if c.is_empty() {
                    return None;
                }
                cubes.push(c);
            }
        }
    }
    cubes.sort();
    cubes.dedup();
    let mut acc = Vec::new();
    if !uncovered_assignment(&layout.free, cubes, value_bound, &mut acc) {
        return None;
    }
    let mut heap = Heap::new();
    for (a, v) in &layout.forced {
        heap.insert(*a, *v);
    }
    for (a, v) in layout.free.iter().zip(acc) {
        heap.insert(*a, v);
    }
    Some(Countermodel {
        store: store.clone(),
        heap,
    })
}
