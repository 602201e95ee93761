//! Translation of sorted entailments into Presburger formulas.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::sorted::{lt_sigma, sorted_formula, SortedEntailment};
use crate::syntax::{
    Entailment, ExtTerm, FreeVars, LinExpr, PureAtom, PureFormula, Rel, Sigma, SpatialAtom, SymbolicHeap, Term, Var,
};

/// The three arguments `(Π, Σ, S)` of the translation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Obligation {
    pub pure: PureFormula,
    pub left: Sigma<ExtTerm>,
    pub rights: Vec<(PureFormula, Sigma<ExtTerm>)>,
}

impl Obligation {
    pub fn new(pure: PureFormula, left: &Sigma, rights: Vec<(PureFormula, Sigma)>) -> Self {
        Obligation {
            pure,
            left: left.map(|t| ExtTerm::from(t)),
            rights: rights.into_iter().map(|(p, s)| (p, s.map(|t| ExtTerm::from(t)))).collect(),
        }
    }

    /// The obligation of a sorted entailment. The pure parts keep their
    /// `Sorted` conjuncts.
    pub fn from_sorted(se: &SortedEntailment) -> Self {
        Obligation::new(
            se.antecedent.pure.clone(),
            &se.antecedent.spatial,
            se.succedents.iter().map(|s| (s.pure.clone(), s.spatial.clone())).collect(),
        )
    }

    /// `(|Σ| + Σᵢ |Σᵢ|, |S|)`
    pub fn measure(&self) -> (usize, usize) {
        let stars = self.left.star_count() + self.rights.iter().map(|(_, s)| s.star_count()).sum::<usize>();
        (stars, self.rights.len())
    }
}

/// Deterministic source of fresh variable names.
#[derive(Clone, Debug)]
pub struct FreshSupply {
    prefix: String,
    counter: usize,
    avoid: BTreeSet<Var>,
    drawn: Vec<Var>,
}

impl FreshSupply {
    pub fn new(prefix: &str, avoid: BTreeSet<Var>) -> Self {
        FreshSupply {
            prefix: prefix.into(),
            counter: 0,
            avoid,
            drawn: Vec::new(),
        }
    }

    pub fn draw(&mut self) -> Var {
        loop {
            let v = Var::new(&format!("{}{}", self.prefix, self.counter));
            self.counter += 1;
            if !self.avoid.contains(&v) {
                self.avoid.insert(v.clone());
                self.drawn.push(v.clone());
                return v;
            }
        }
    }

    pub fn drawn(&self) -> &[Var] {
        &self.drawn
    }
}

/// An array in a succedent whose size depends on the succedent's binders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionViolation {
    pub succedent: usize,
    pub atom: SpatialAtom,
    pub vars: Vec<Var>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConditionReport {
    pub violations: Vec<ConditionViolation>,
}

impl ConditionReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return f.write_str("ok");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "succedent {}: size of {} depends on", v.succedent, v.atom)?;
            for x in &v.vars {
                write!(f, " {}", x)?;
            }
        }
        Ok(())
    }
}

/// Checks that no succedent array has a size mentioning that succedent's
/// existential variables.
pub fn check_condition(e: &Entailment) -> ConditionReport {
    check_succedents(&e.succedents)
}

pub fn check_succedents(succedents: &[SymbolicHeap]) -> ConditionReport {
    let mut violations = Vec::new();
    for (i, phi) in succedents.iter().enumerate() {
        for atom in &phi.spatial.atoms {
            if let SpatialAtom::Arr(lo, hi) = atom {
                let size = hi.minus(lo);
                let vars: Vec<Var> = phi.ex_vars.iter().filter(|y| size.coeff(y) != 0).cloned().collect();
                if !vars.is_empty() {
                    violations.push(ConditionViolation {
                        succedent: i,
                        atom: atom.clone(),
                        vars,
                    });
                }
            }
        }
    }
    ConditionReport { violations }
}

/// Clause applied at a node of the unfolding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Clause {
    EmpNEmp,
    EmpEmp,
    NEmpEmp,
    Empty,
    PtoPto,
    PtoArr,
    ArrPto,
    ArrArr,
    /// Pruned by the simplifier: the accumulated pure part is false.
    Vacuous,
}

impl Clause {
    pub fn is_base(self) -> bool {
        matches!(self, Clause::EmpEmp | Clause::Empty | Clause::Vacuous)
    }

    /// Clauses that may grow the measure until the next points-to step.
    pub fn is_split(self) -> bool {
        matches!(self, Clause::PtoArr | Clause::ArrPto)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceNode {
    pub parent: Option<usize>,
    pub clause: Clause,
    pub measure: (usize, usize),
    pub depth: usize,
}

/// Record of every node of an unfolding, in creation order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub nodes: Vec<TraceNode>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceViolation {
    MeasureIncrease { node: usize, from: (usize, usize), to: (usize, usize) },
    NonBaseLeaf { node: usize, clause: Clause },
    TooDeep { node: usize, depth: usize, bound: usize },
}

impl Trace {
    /// Depth allowed for an unfolding starting at `initial`.
    pub fn depth_bound(initial: (usize, usize)) -> usize {
        4 * (initial.0 + initial.1 + 1)
    }

    /// Checks that every chain ends in a base clause, that the measure never
    /// grows between consecutive checkpoints, and that depth is bounded.
    ///
    /// A checkpoint is the root or any node whose parent is not a split
    /// clause.
    pub fn check(&self) -> Result<(), TraceViolation> {
        let Some(root) = self.nodes.first() else { return Ok(()) };
        let bound = Self::depth_bound(root.measure);
        let mut has_child = vec![false; self.nodes.len()];
        for n in &self.nodes {
            if let Some(p) = n.parent {
                has_child[p] = true;
            }
        }
        let is_checkpoint = |k: usize| match self.nodes[k].parent {
            None => true,
            Some(p) => !self.nodes[p].clause.is_split(),
        };
        for (k, n) in self.nodes.iter().enumerate() {
            if !has_child[k] && !n.clause.is_base() {
                return Err(TraceViolation::NonBaseLeaf { node: k, clause: n.clause });
            }
            if n.depth > bound {
                return Err(TraceViolation::TooDeep {
                    node: k,
                    depth: n.depth,
                    bound,
                });
            }
            if is_checkpoint(k) {
                let mut a = n.parent;
                while let Some(p) = a {
                    if is_checkpoint(p) {
                        break;
                    }
                    a = self.nodes[p].parent;
                }
                if let Some(p) = a {
                    let from = self.nodes[p].measure;
                    if n.measure > from {
                        return Err(TraceViolation::MeasureIncrease {
                            node: k,
                            from,
                            to: n.measure,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TranslateOptions {
    /// Fold constant atoms and prune branches whose pure part is false.
    pub simplify: bool,
    /// Abort after this many nodes.
    pub node_budget: Option<usize>,
    pub trace: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TranslateError {
    BudgetExceeded { nodes: usize },
    /// The caller's interrupt fired.
    Interrupted { nodes: usize },
    Condition(ConditionReport),
}

impl fmt::Display for TranslateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TranslateError::BudgetExceeded { nodes } => write!(f, "translation exceeded {} nodes", nodes),
            TranslateError::Interrupted { nodes } => write!(f, "translation interrupted after {} nodes", nodes),
            TranslateError::Condition(r) => write!(f, "condition violated: {}", r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Translation {
    pub formula: PureFormula,
    /// Fresh variables occurring in `formula`, in draw order.
    pub fresh: Vec<Var>,
    pub nodes: usize,
    pub trace: Option<Trace>,
}

/// Unfolds the translation on `ob`.
pub fn translate_p(
    ob: Obligation,
    fresh: &mut FreshSupply,
    opts: &TranslateOptions,
) -> Result<Translation, TranslateError> {
    translate_p_interruptible(ob, fresh, opts, &|| false)
}

/// [`translate_p`], polling `interrupt` at every node.
pub fn translate_p_interruptible(
    ob: Obligation,
    fresh: &mut FreshSupply,
    opts: &TranslateOptions,
    interrupt: &dyn Fn() -> bool,
) -> Result<Translation, TranslateError> {
    let mut cx = Unfold {
        fresh,
        simplify: opts.simplify,
        budget: opts.node_budget,
        nodes: 0,
        steps: 0,
        interrupt,
        trace: opts.trace.then(Trace::default),
    };
    let formula = cx.p(ob, None, 0)?;
    let occurring = formula.free_vars();
    let fresh_vars = cx.fresh.drawn().iter().filter(|v| occurring.contains(*v)).cloned().collect();
    Ok(Translation {
        formula,
        fresh: fresh_vars,
        nodes: cx.nodes,
        trace: cx.trace,
    })
}

struct Unfold<'a> {
    fresh: &'a mut FreshSupply,
    simplify: bool,
    budget: Option<usize>,
    nodes: usize,
    steps: usize,
    interrupt: &'a dyn Fn() -> bool,
    trace: Option<Trace>,
}

const POLL_EVERY: usize = 256;

type Pair = (PureFormula, Sigma<ExtTerm>);

fn strip_emps(sigma: &mut Sigma<ExtTerm>) {
    let k = sigma.atoms.iter().take_while(|a| a.is_emp()).count();
    sigma.atoms.drain(..k);
}

fn rest(sigma: &Sigma<ExtTerm>) -> Sigma<ExtTerm> {
    Sigma::new(sigma.atoms[1..].to_vec())
}

fn cons(head: Vec<SpatialAtom<ExtTerm>>, tail: &Sigma<ExtTerm>) -> Sigma<ExtTerm> {
    let mut atoms = head;
    atoms.extend(tail.atoms.iter().cloned());
    Sigma::new(atoms)
}

fn ext(rel: Rel, l: &ExtTerm, r: &ExtTerm) -> PureFormula {
    PureFormula::ext(rel, l.clone(), r.clone())
}

impl Unfold<'_> {
    fn record(&mut self, parent: Option<usize>, clause: Clause, measure: (usize, usize), depth: usize) -> Option<usize> {
        let t = self.trace.as_mut()?;
        t.nodes.push(TraceNode {
            parent,
            clause,
            measure,
            depth,
        });
        Some(t.nodes.len() - 1)
    }

    fn tick(&mut self) -> Result<(), TranslateError> {
        self.nodes += 1;
        match self.budget {
            Some(b) if self.nodes > b => Err(TranslateError::BudgetExceeded { nodes: b }),
            _ if (self.interrupt)() => Err(TranslateError::Interrupted { nodes: self.nodes }),
            _ => Ok(()),
        }
    }

    fn poll(&mut self) -> Result<(), TranslateError> {
        self.steps += 1;
        if self.steps % POLL_EVERY == 0 && (self.interrupt)() {
            return Err(TranslateError::Interrupted { nodes: self.nodes });
        }
        Ok(())
    }

    fn conjoin(&self, pi: &PureFormula, extra: Vec<PureFormula>) -> PureFormula {
        let mut out = pi.clone();
        for f in extra {
            out = out.and(f);
        }
        if self.simplify {
            simplify(&out)
        } else {
            out
        }
    }

    fn all(&self, parts: Vec<PureFormula>) -> PureFormula {
        if self.simplify {
            simplify(&PureFormula::conj(parts))
        } else if parts.len() == 1 {
            parts.into_iter().next().unwrap()
        } else {
            PureFormula::conj(parts)
        }
    }

    fn p(&mut self, mut ob: Obligation, parent: Option<usize>, depth: usize) -> Result<PureFormula, TranslateError> {
        self.tick()?;
        strip_emps(&mut ob.left);
        ob.rights.iter_mut().for_each(|(_, s)| strip_emps(s));
        if self.simplify {
            ob.pure = simplify(&ob.pure);
            ob.rights.iter_mut().for_each(|(p, _)| *p = simplify(p));
            ob.rights.retain(|(p, _)| *p != PureFormula::False);
            if ob.pure == PureFormula::False {
                self.record(parent, Clause::Vacuous, ob.measure(), depth);
                return Ok(PureFormula::True);
            }
        }
        let clause = select(&ob);
        let id = self.record(parent, clause, ob.measure(), depth);
        let d = depth + 1;
        let Obligation { pure, left, mut rights } = ob;
        match clause {
            Clause::EmpNEmp => {
                let i = rights.iter().position(|(_, s)| !s.is_empty()).unwrap();
                rights.remove(i);
                self.p(Obligation { pure, left, rights }, id, d)
            }
            Clause::EmpEmp => {
                let goal = PureFormula::disj(rights.into_iter().map(|(p, _)| p).collect());
                let f = PureFormula::implies(pure, goal);
                Ok(if self.simplify { simplify(&f) } else { f })
            }
            Clause::NEmpEmp => {
                let i = rights.iter().position(|(_, s)| s.is_empty()).unwrap();
                rights.remove(i);
                self.p(Obligation { pure, left, rights }, id, d)
            }
            Clause::Empty => {
                let sorted = sorted_formula(&left);
                let f = PureFormula::not(PureFormula::conj(vec![pure, sorted]));
                Ok(if self.simplify { simplify(&f) } else { f })
            }
            Clause::PtoPto => {
                let SpatialAtom::PointsTo(t, u) = &left.atoms[0] else { unreachable!() };
                let sigma = rest(&left);
                let pure = self.conjoin(&pure, vec![lt_sigma(t, &sigma)]);
                let rights = rights
                    .iter()
                    .map(|(pi, s)| {
                        let SpatialAtom::PointsTo(ti, ui) = &s.atoms[0] else { unreachable!() };
                        let si = rest(s);
                        let extra = vec![ext(Rel::Eq, t, ti), ext(Rel::Eq, u, ui), lt_sigma(ti, &si)];
                        (self.conjoin(pi, extra), si)
                    })
                    .collect();
                self.p(Obligation { pure, left: sigma, rights }, id, d)
            }
            Clause::PtoArr => {
                let SpatialAtom::PointsTo(_, u) = &left.atoms[0] else { unreachable!() };
                let i = rights.iter().position(|(_, s)| matches!(s.atoms[0], SpatialAtom::Arr(..))).unwrap();
                let (pi, si) = rights[i].clone();
                let SpatialAtom::Arr(ti, ti2) = &si.atoms[0] else { unreachable!() };
                let tail = rest(&si);

                let mut one = rights.clone();
                one[i] = (pi.clone(), cons(vec![SpatialAtom::PointsTo(ti.clone(), u.clone())], &tail));
                let mut more = rights.clone();
                more[i] = (
                    pi,
                    cons(
                        vec![SpatialAtom::PointsTo(ti.clone(), u.clone()), SpatialAtom::Arr(ti.offset(1), ti2.clone())],
                        &tail,
                    ),
                );
                let mut none = rights.clone();
                none.remove(i);

                let branches = vec![
                    (ext(Rel::Eq, ti2, ti), one),
                    (ext(Rel::Lt, ti, ti2), more),
                    (ext(Rel::Lt, ti2, ti), none),
                ];
                let mut parts = Vec::new();
                for (guard, rights) in branches {
                    let pure = self.conjoin(&pure, vec![guard]);
                    parts.push(self.p(Obligation { pure, left: left.clone(), rights }, id, d)?);
                }
                Ok(self.all(parts))
            }
            Clause::ArrPto => {
                let SpatialAtom::Arr(t, t2) = &left.atoms[0] else { unreachable!() };
                let sigma = rest(&left);
                let z = ExtTerm::from(Term::var(self.fresh.draw()));
                let z2 = ExtTerm::from(Term::var(self.fresh.draw()));
                let longer = cons(
                    vec![SpatialAtom::PointsTo(t.clone(), z), SpatialAtom::Arr(t.offset(1), t2.clone())],
                    &sigma,
                );
                let single = cons(vec![SpatialAtom::PointsTo(t.clone(), z2)], &sigma);
                let branches = vec![(ext(Rel::Lt, t, t2), longer), (ext(Rel::Eq, t2, t), single)];
                let mut parts = Vec::new();
                for (guard, left) in branches {
                    let pure = self.conjoin(&pure, vec![guard]);
                    parts.push(self.p(Obligation { pure, left, rights: rights.clone() }, id, d)?);
                }
                Ok(self.all(parts))
            }
            Clause::ArrArr => self.arr_arr(pure, left, rights, id, d),
            Clause::Vacuous => unreachable!(),
        }
    }

    /// Splits off the shortest head array.
    ///
    /// Besides the two families of the textbook clause, every right pair gets
    /// `t = tᵢ`, the remainder case requires the shortest right array to be
    /// well formed, and a third family drops right pairs whose head array is
    /// empty.
    fn arr_arr(
        &mut self,
        pure: PureFormula,
        left: Sigma<ExtTerm>,
        rights: Vec<Pair>,
        id: Option<usize>,
        d: usize,
    ) -> Result<PureFormula, TranslateError> {
        let SpatialAtom::Arr(t, t2) = &left.atoms[0] else { unreachable!() };
        let sigma = rest(&left);
        let heads: Vec<(ExtTerm, ExtTerm)> = rights
            .iter()
            .map(|(_, s)| match &s.atoms[0] {
                SpatialAtom::Arr(a, b) => (a.clone(), b.clone()),
                _ => unreachable!(),
            })
            .collect();
        let m = t2.sub(t);
        let ms: Vec<ExtTerm> = heads.iter().map(|(a, b)| b.sub(a)).collect();
        let n = rights.len();
        let zero = ExtTerm::default();
        let mut parts = Vec::new();

        // The left array is among the shortest.
        let shared = vec![ext(Rel::Le, t, t2), lt_sigma(t2, &sigma)];
        let choices: Vec<Vec<(bool, PureFormula)>> = (0..n)
            .map(|i| vec![(true, ext(Rel::Eq, &m, &ms[i])), (false, ext(Rel::Lt, &m, &ms[i]))])
            .collect();
        for (members, guards) in self.partitions(&choices, &shared, id, d)? {
            let mut guard = guards;
            guard.extend(shared.iter().cloned());
            let pure = self.conjoin(&pure, guard);
            let rights = self.cut_rights(&rights, &heads, &members, t, &m);
            parts.push(self.p(Obligation { pure, left: sigma.clone(), rights }, id, d)?);
        }

        // A right array is strictly shorter; the one with the least index
        // fixes the cut.
        for j in 0..n {
            let mj = &ms[j];
            let shared = vec![ext(Rel::Lt, mj, &m), ext(Rel::Le, &zero, mj)];
            let choices: Vec<Vec<(bool, PureFormula)>> = (0..n)
                .map(|i| match i.cmp(&j) {
                    core::cmp::Ordering::Less => vec![(false, ext(Rel::Lt, mj, &ms[i]))],
                    core::cmp::Ordering::Equal => vec![(true, PureFormula::True)],
                    core::cmp::Ordering::Greater => {
                        vec![(true, ext(Rel::Eq, mj, &ms[i])), (false, ext(Rel::Lt, mj, &ms[i]))]
                    }
                })
                .collect();
            for (members, guards) in self.partitions(&choices, &shared, id, d)? {
                let mut guard = vec![shared[0].clone()];
                guard.extend(guards.into_iter().filter(|g| *g != PureFormula::True));
                guard.push(shared[1].clone());
                let pure = self.conjoin(&pure, guard);
                let left = cons(vec![SpatialAtom::Arr(t.add(mj).offset(1), t2.clone())], &sigma);
                let rights = self.cut_rights(&rights, &heads, &members, t, mj);
                parts.push(self.p(Obligation { pure, left, rights }, id, d)?);
            }
        }

        // A right head array is empty.
        for i in 0..n {
            let (a, b) = &heads[i];
            let pure = self.conjoin(&pure, vec![ext(Rel::Lt, b, a)]);
            let mut rest_rights = rights.clone();
            rest_rights.remove(i);
            parts.push(self.p(Obligation { pure, left: left.clone(), rights: rest_rights }, id, d)?);
        }
        Ok(self.all(parts))
    }

    /// Right pairs after removing the first `cut + 1` cells of every head
    /// array: members lose their head, the others keep the remainder.
    fn cut_rights(
        &self,
        rights: &[Pair],
        heads: &[(ExtTerm, ExtTerm)],
        members: &[bool],
        t: &ExtTerm,
        cut: &ExtTerm,
    ) -> Vec<Pair> {
        rights
            .iter()
            .zip(heads)
            .zip(members)
            .map(|(((pi, s), (ti, ti2)), &member)| {
                let tail = rest(s);
                let at = ext(Rel::Eq, t, ti);
                if member {
                    let pure = self.conjoin(pi, vec![at, lt_sigma(&ti.add(cut), &tail)]);
                    (pure, tail)
                } else {
                    let pure = self.conjoin(pi, vec![at]);
                    (pure, cons(vec![SpatialAtom::Arr(ti.add(cut).offset(1), ti2.clone())], &tail))
                }
            })
            .collect()
    }

    /// Every choice of one option per position, with the guard atoms of the
    /// chosen options. With simplification on, choices whose guards fold to
    /// false are skipped (and recorded as vacuous).
    fn partitions(
        &mut self,
        choices: &[Vec<(bool, PureFormula)>],
        shared: &[PureFormula],
        id: Option<usize>,
        d: usize,
    ) -> Result<Vec<(Vec<bool>, Vec<PureFormula>)>, TranslateError> {
        let mut out = Vec::new();
        if self.simplify && shared.iter().any(|g| simplify(g) == PureFormula::False) {
            self.record(id, Clause::Vacuous, (0, 0), d);
            return Ok(out);
        }
        let mut stack: Vec<(Vec<bool>, Vec<PureFormula>)> = vec![(Vec::new(), Vec::new())];
        while let Some((members, guards)) = stack.pop() {
            self.poll()?;
            let k = members.len();
            if k == choices.len() {
                out.push((members, guards));
                if let Some(b) = self.budget {
                    if self.nodes + out.len() > b {
                        return Err(TranslateError::BudgetExceeded { nodes: b });
                    }
                }
                continue;
            }
            for (member, g) in choices[k].iter().rev() {
                if self.simplify && simplify(g) == PureFormula::False {
                    self.record(id, Clause::Vacuous, (0, 0), d);
                    continue;
                }
                let mut m = members.clone();
                m.push(*member);
                let mut gs = guards.clone();
                gs.push(g.clone());
                stack.push((m, gs));
            }
        }
        Ok(out)
    }
}

fn select(ob: &Obligation) -> Clause {
    if ob.left.is_empty() {
        return if ob.rights.iter().any(|(_, s)| !s.is_empty()) {
            Clause::EmpNEmp
        } else {
            Clause::EmpEmp
        };
    }
    if ob.rights.iter().any(|(_, s)| s.is_empty()) {
        return Clause::NEmpEmp;
    }
    if ob.rights.is_empty() {
        return Clause::Empty;
    }
    let right_pto = |(_, s): &Pair| matches!(s.atoms[0], SpatialAtom::PointsTo(..));
    match ob.left.atoms[0] {
        SpatialAtom::PointsTo(..) if ob.rights.iter().all(right_pto) => Clause::PtoPto,
        SpatialAtom::PointsTo(..) => Clause::PtoArr,
        SpatialAtom::Arr(..) if ob.rights.iter().any(right_pto) => Clause::ArrPto,
        SpatialAtom::Arr(..) => Clause::ArrArr,
        SpatialAtom::Emp => unreachable!(),
    }
}

fn fold_atom(a: &PureAtom) -> Option<bool> {
    a.difference().as_constant().map(|d| a.rel.holds(d, 0))
}

/// Light simplification: folds constant atoms, absorbs `true`/`false`,
/// flattens nested conjunctions and disjunctions and drops duplicates.
pub fn simplify(f: &PureFormula) -> PureFormula {
    use PureFormula as F;
    match f {
        F::True | F::False => f.clone(),
        F::Atom(a) => match fold_atom(a) {
            Some(true) => F::True,
            Some(false) => F::False,
            None => f.clone(),
        },
        F::And(cs) | F::Or(cs) => {
            let is_and = matches!(f, F::And(_));
            let (unit, zero) = if is_and { (F::True, F::False) } else { (F::False, F::True) };
            let mut out: Vec<PureFormula> = Vec::new();
            let push = |g: PureFormula, out: &mut Vec<PureFormula>| {
                if !out.contains(&g) {
                    out.push(g);
                }
            };
            for c in cs {
                let c = simplify(c);
                if c == zero {
                    return zero;
                }
                if c == unit {
                    continue;
                }
                match c {
                    F::And(inner) if is_and => inner.into_iter().for_each(|g| push(g, &mut out)),
                    F::Or(inner) if !is_and => inner.into_iter().for_each(|g| push(g, &mut out)),
                    g => push(g, &mut out),
                }
            }
            match out.len() {
                0 => unit,
                1 => out.pop().unwrap(),
                _ if is_and => F::And(out),
                _ => F::Or(out),
            }
        }
        F::Not(g) => match simplify(g) {
            F::True => F::False,
            F::False => F::True,
            F::Not(h) => *h,
            g => F::not(g),
        },
        F::Implies(a, b) => match (simplify(a), simplify(b)) {
            (F::False, _) | (_, F::True) => F::True,
            (F::True, b) => b,
            (a, F::False) => simplify(&F::not(a)),
            (a, b) => F::implies(a, b),
        },
        F::Exists(v, g) | F::Forall(v, g) => {
            let g = simplify(g);
            if !g.free_vars().contains(v) {
                return g;
            }
            if matches!(f, F::Exists(..)) {
                F::exists(v.clone(), g)
            } else {
                F::forall(v.clone(), g)
            }
        }
    }
}

/// `∀ universal ∃ existential. body` over the naturals.
#[derive(Clone, PartialEq, Eq)]
pub struct ClosedFormula {
    pub universal: Vec<Var>,
    pub existential: Vec<Var>,
    pub body: PureFormula,
}

impl ClosedFormula {
    pub fn ground(body: PureFormula) -> Self {
        ClosedFormula {
            universal: Vec::new(),
            existential: Vec::new(),
            body,
        }
    }

    /// Closes `body` universally over its free variables.
    pub fn universal_closure(body: PureFormula) -> Self {
        ClosedFormula {
            universal: body.free_vars().into_iter().collect(),
            existential: Vec::new(),
            body,
        }
    }

    /// The formula with its prefix as nested quantifiers.
    pub fn to_formula(&self) -> PureFormula {
        let mut f = self.body.clone();
        for y in self.existential.iter().rev() {
            f = PureFormula::exists(y.clone(), f);
        }
        for x in self.universal.iter().rev() {
            f = PureFormula::forall(x.clone(), f);
        }
        f
    }

    pub fn is_closed(&self) -> bool {
        let bound: BTreeSet<&Var> = self.universal.iter().chain(&self.existential).collect();
        self.body.free_vars().iter().all(|v| bound.contains(v))
    }
}

impl fmt::Debug for ClosedFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ClosedFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.universal.is_empty() {
            f.write_str("All")?;
            for x in &self.universal {
                write!(f, " {}", x)?;
            }
            f.write_str(". ")?;
        }
        if !self.existential.is_empty() {
            f.write_str("Ex")?;
            for y in &self.existential {
                write!(f, " {}", y)?;
            }
            f.write_str(". ")?;
        }
        write!(f, "{}", self.body)
    }
}

/// `∀ free ∀ z ∃ y. P(Π, Σ, S)` for a sorted entailment.
pub fn build_validity_formula(
    se: &SortedEntailment,
    opts: &TranslateOptions,
) -> Result<(ClosedFormula, Translation), TranslateError> {
    build_validity_formula_interruptible(se, opts, &|| false)
}

/// [`build_validity_formula`] with an interrupt polled during translation.
pub fn build_validity_formula_interruptible(
    se: &SortedEntailment,
    opts: &TranslateOptions,
    interrupt: &dyn Fn() -> bool,
) -> Result<(ClosedFormula, Translation), TranslateError> {
    let report = check_succedents(&se.succedents);
    if !report.ok() {
        return Err(TranslateError::Condition(report));
    }
    let e = se.to_entailment();
    let mut fresh = FreshSupply::new(&format!("z${}_", se.index), e.all_vars());
    let tr = translate_p_interruptible(Obligation::from_sorted(se), &mut fresh, opts, interrupt)?;
    let mut universal: Vec<Var> = e.free_vars().into_iter().collect();
    universal.extend(tr.fresh.iter().cloned());
    let existential = se.succedents.iter().flat_map(|s| s.ex_vars.iter().cloned()).collect();
    let closed = ClosedFormula {
        universal,
        existential,
        body: tr.formula.clone(),
    };
    debug_assert!(closed.is_closed());
    Ok((closed, tr))
}

/// Size of a spatial formula as a linear expression: one cell per points-to,
/// `hi - lo + 1` cells per array.
pub fn size_of(sigma: &Sigma) -> LinExpr {
    let mut total = LinExpr::default();
    for a in &sigma.atoms {
        match a {
            SpatialAtom::Emp => {}
            SpatialAtom::PointsTo(..) => total.constant += 1,
            SpatialAtom::Arr(lo, hi) => {
                let s = hi.minus(lo);
                total.constant += s.constant + 1;
                for (v, c) in s.coeffs {
                    *total.coeffs.entry(v).or_insert(0) += c;
                }
                total.coeffs.retain(|_, c| *c != 0);
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{eval_pure, Store};
    use crate::syntax::PureFormula as F;
    use alloc::string::ToString;

    fn pto(a: impl Into<Term>, v: impl Into<Term>) -> SpatialAtom {
        SpatialAtom::PointsTo(a.into(), v.into())
    }
    fn arr(a: impl Into<Term>, b: impl Into<Term>) -> SpatialAtom {
        SpatialAtom::Arr(a.into(), b.into())
    }
    fn sig(atoms: Vec<SpatialAtom>) -> Sigma {
        Sigma::new(atoms)
    }
    fn run(ob: Obligation, simplify: bool) -> Translation {
        let mut fresh = FreshSupply::new("z", BTreeSet::new());
        let opts = TranslateOptions {
            simplify,
            node_budget: None,
            trace: true,
        };
        let tr = translate_p(ob, &mut fresh, &opts).unwrap();
        tr.trace.as_ref().unwrap().check().unwrap();
        tr
    }
    fn ground(f: &PureFormula) -> bool {
        eval_pure(&Store::new(), f, 0)
    }

    #[test]
    fn golden_example_is_true() {
        let ob = Obligation::new(F::True, &sig(vec![pto(3, 10), pto(4, 11)]), vec![(F::True, sig(vec![arr(3, 4)]))]);
        for simplify in [false, true] {
            let tr = run(ob.clone(), simplify);
            assert!(tr.fresh.is_empty());
            assert!(ground(&tr.formula), "{}", tr.formula);
        }
    }

    #[test]
    fn emp_emp() {
        let ob = Obligation::new(F::True, &Sigma::emp(), vec![(F::True, Sigma::emp())]);
        let tr = run(ob, false);
        assert_eq!(tr.formula, F::implies(F::True, F::disj(vec![F::True])));
    }

    #[test]
    fn nonempty_against_emp() {
        let ob = Obligation::new(F::True, &sig(vec![pto("x", 0), pto("y", 0)]), vec![(F::True, Sigma::emp())]);
        let tr = run(ob, false);
        let expected = F::not(F::conj(vec![
            F::True,
            F::conj(vec![F::lt(0, "x"), F::conj(vec![F::lt("x", "y"), F::conj(vec![F::True, F::True])])]),
        ]));
        assert_eq!(tr.formula, expected);
        let nodes: Vec<Clause> = tr.trace.unwrap().nodes.iter().map(|n| n.clause).collect();
        assert_eq!(nodes, vec![Clause::NEmpEmp, Clause::Empty]);
    }

    #[test]
    fn motivating_example_draws_one_live_variable() {
        let ob = Obligation::new(
            F::True,
            &sig(vec![arr("x", "x")]),
            vec![(F::True, sig(vec![pto("x", 0)])), (F::lt(0, "y"), sig(vec![pto("x", "y")]))],
        );
        let tr = run(ob.clone(), true);
        assert_eq!(tr.fresh.len(), 1);
        let mut fresh = FreshSupply::new("z", BTreeSet::new());
        let raw = translate_p(ob, &mut fresh, &TranslateOptions::default()).unwrap();
        assert_eq!((raw.fresh.len(), fresh.drawn().len()), (1, 2));
    }

    #[test]
    fn right_array_must_start_at_left_head() {
        // Arr(1,2) |- Arr(3,4) is not valid.
        let ob = Obligation::new(F::True, &sig(vec![arr(1, 2)]), vec![(F::True, sig(vec![arr(3, 4)]))]);
        assert!(!ground(&run(ob, false).formula));
    }

    #[test]
    fn empty_right_array_is_not_a_shortcut() {
        // Arr(1,2) |- Arr(5,3) is not valid.
        let ob = Obligation::new(F::True, &sig(vec![arr(1, 2)]), vec![(F::True, sig(vec![arr(5, 3)]))]);
        for simplify in [false, true] {
            assert!(!ground(&run(ob.clone(), simplify).formula));
        }
    }

    #[test]
    fn array_splits() {
        let ob = Obligation::new(
            F::True,
            &sig(vec![arr(3, 5)]),
            vec![(F::True, sig(vec![arr(3, 3), arr(4, 5)]))],
        );
        assert!(ground(&run(ob, false).formula));
        let ob = Obligation::new(
            F::True,
            &sig(vec![arr(1, 5)]),
            vec![(F::True, sig(vec![arr(1, 2), arr(3, 5)])), (F::True, sig(vec![arr(1, 1), arr(2, 4)]))],
        );
        assert!(ground(&run(ob, false).formula));
        let ob = Obligation::new(F::True, &sig(vec![arr(1, 5)]), vec![(F::True, sig(vec![arr(1, 1), arr(2, 4)]))]);
        assert!(!ground(&run(ob, true).formula));
    }

    #[test]
    fn interrupt_stops_translation() {
        let ob = Obligation::new(
            F::True,
            &sig(vec![arr("a", "b"), arr("c", "d")]),
            vec![(F::True, sig(vec![arr("a", "c"), arr("e", "d")])); 4],
        );
        let mut fresh = FreshSupply::new("z", BTreeSet::new());
        let polls = core::cell::Cell::new(0);
        let interrupt = || {
            polls.set(polls.get() + 1);
            polls.get() > 3
        };
        let res = translate_p_interruptible(ob, &mut fresh, &TranslateOptions::default(), &interrupt);
        assert_eq!(res, Err(TranslateError::Interrupted { nodes: 4 }));
    }

    #[test]
    fn budget_is_enforced() {
        let ob = Obligation::new(
            F::True,
            &sig(vec![arr("a", "b"), arr("c", "d")]),
            vec![(F::True, sig(vec![arr("a", "c"), arr("e", "d")])); 4],
        );
        let mut fresh = FreshSupply::new("z", BTreeSet::new());
        let opts = TranslateOptions {
            simplify: false,
            node_budget: Some(50),
            trace: false,
        };
        assert_eq!(translate_p(ob, &mut fresh, &opts), Err(TranslateError::BudgetExceeded { nodes: 50 }));
    }

    #[test]
    fn condition_examples() {
        let y = Var::new("y");
        let y2 = Var::new("y'");
        let ok = Entailment::new(
            SymbolicHeap::spatial(vec![arr(1, 5)]),
            vec![SymbolicHeap::spatial(vec![
                arr("y", Term::var("y").offset(1)),
                arr("y'", Term::var("y'").offset(2)),
            ])
            .with_ex_vars(vec![y.clone(), y2])],
        );
        assert!(check_condition(&ok).ok());
        let bad = Entailment::new(
            SymbolicHeap::spatial(vec![arr(1, 5)]),
            vec![SymbolicHeap::spatial(vec![arr(1, Term::var("y").offset(1)), arr(Term::var("y").offset(2), 5)])
                .with_ex_vars(vec![y.clone()])],
        );
        let r = check_condition(&bad);
        assert_eq!(r.violations.len(), 2);
        assert_eq!(r.violations[0].vars, vec![y]);
        let free = Entailment::new(
            SymbolicHeap::spatial(vec![arr(1, 5)]),
            vec![SymbolicHeap::spatial(vec![arr("x", Term::var("x").offset(3))])],
        );
        assert!(check_condition(&free).ok());
    }

    #[test]
    fn fresh_names_avoid_used_ones() {
        let avoid: BTreeSet<Var> = [Var::new("z0"), Var::new("z2")].into_iter().collect();
        let mut s = FreshSupply::new("z", avoid);
        let got: Vec<String> = (0..3).map(|_| s.draw().to_string()).collect();
        assert_eq!(got, vec!["z1", "z3", "z4"]);
    }

    #[test]
    fn simplify_folds() {
        let f = F::conj(vec![F::lt(3, 4), F::eq("x", "x"), F::lt("x", "y"), F::lt("x", "y")]);
        assert_eq!(simplify(&f), F::lt("x", "y"));
        assert_eq!(simplify(&F::conj(vec![F::lt(4, 4), F::lt("x", "y")])), F::False);
        assert_eq!(simplify(&F::implies(F::lt(4, 3), F::lt("x", "y"))), F::True);
    }

    #[test]
    fn size_examples() {
        let s = sig(vec![pto(1, 0), arr("x", Term::var("x").offset(2)), SpatialAtom::Emp]);
        assert_eq!(size_of(&s).as_constant(), Some(4));
    }
}
