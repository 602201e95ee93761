//! Terms, pure formulas, spatial formulas, symbolic heaps and entailments.
//!
//! Terms are kept in a linear normal form: a natural constant plus natural
//! coefficients per variable. Differences of terms only occur inside the
//! translation, where they are carried as [`ExtTerm`] (a pair `plus - minus`)
//! and eliminated by [`normalize_atom`] when an atom is produced.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Add;

/// A variable name. Cheap to clone and safe to share across threads.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

/// Linear term `c + a1*x1 + ... + an*xn` with natural constant and coefficients.
///
/// Zero coefficients are never stored, so structural equality is equality of
/// normal forms.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    constant: u64,
    coeffs: BTreeMap<Var, u64>,
}

impl Term {
    pub fn zero() -> Self {
        Term::default()
    }

    pub fn constant(c: u64) -> Self {
        Term {
            constant: c,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn var(v: impl Into<Var>) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(v.into(), 1);
        Term {
            constant: 0,
            coeffs,
        }
    }

    pub fn constant_part(&self) -> u64 {
        self.constant
    }

    pub fn coeff(&self, v: &Var) -> u64 {
        self.coeffs.get(v).copied().unwrap_or(0)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&Var, u64)> {
        self.coeffs.iter().map(|(v, c)| (v, *c))
    }

    pub fn is_ground(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0 && self.coeffs.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.coeffs.keys()
    }

    /// `self + c`
    pub fn offset(&self, c: u64) -> Term {
        let mut t = self.clone();
        t.constant += c;
        t
    }

    pub fn scale(&self, k: u64) -> Term {
        if k == 0 {
            return Term::zero();
        }
        Term {
            constant: self.constant * k,
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * k)).collect(),
        }
    }

    /// Signed difference `self - other` as a linear expression.
    pub fn minus(&self, other: &Term) -> LinExpr {
        LinExpr::from(self).sub(&LinExpr::from(other))
    }

    /// Evaluate under a valuation of the variables.
    pub fn eval(&self, value_of: &dyn Fn(&Var) -> i128) -> i128 {
        self.coeffs
            .iter()
            .fold(self.constant as i128, |acc, (v, c)| acc + (*c as i128) * value_of(v))
    }

    pub fn substitute(&self, bindings: &BTreeMap<Var, Term>) -> Term {
        let mut out = Term::constant(self.constant);
        for (v, c) in &self.coeffs {
            match bindings.get(v) {
                Some(t) => out = out + t.scale(*c),
                None => out = out + Term::var(v.clone()).scale(*c),
            }
        }
        out
    }

    pub fn rename(&self, from: &Var, to: &Var) -> Term {
        let mut b = BTreeMap::new();
        b.insert(from.clone(), Term::var(to.clone()));
        self.substitute(&b)
    }
}

impl Add for Term {
    type Output = Term;

    fn add(mut self, rhs: Term) -> Term {
        self.constant += rhs.constant;
        for (v, c) in rhs.coeffs {
            *self.coeffs.entry(v).or_insert(0) += c;
        }
        self
    }
}

impl<'a> Add<&'a Term> for &'a Term {
    type Output = Term;

    fn add(self, rhs: &Term) -> Term {
        self.clone() + rhs.clone()
    }
}

impl From<u64> for Term {
    fn from(c: u64) -> Self {
        Term::constant(c)
    }
}

impl From<Var> for Term {
    fn from(v: Var) -> Self {
        Term::var(v)
    }
}

impl From<&str> for Term {
    fn from(v: &str) -> Self {
        Term::var(v)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

// Multiplication is not part of the surface language, so `2x` prints as `x + x`.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.coeffs {
            for _ in 0..*c {
                if !first {
                    f.write_str(" + ")?;
                }
                write!(f, "{}", v)?;
                first = false;
            }
        }
        if self.constant != 0 || first {
            if !first {
                f.write_str(" + ")?;
            }
            write!(f, "{}", self.constant)?;
        }
        Ok(())
    }
}

/// Signed linear expression. Used for size computations and constant folding,
/// never stored in atoms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinExpr {
    pub constant: i128,
    pub coeffs: BTreeMap<Var, i128>,
}

impl LinExpr {
    pub fn sub(&self, other: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.constant -= other.constant;
        for (v, c) in &other.coeffs {
            *out.coeffs.entry(v.clone()).or_insert(0) -= c;
        }
        out.coeffs.retain(|_, c| *c != 0);
        out
    }

    pub fn coeff(&self, v: &Var) -> i128 {
        self.coeffs.get(v).copied().unwrap_or(0)
    }

    pub fn as_constant(&self) -> Option<i128> {
        self.coeffs.is_empty().then_some(self.constant)
    }
}

impl From<&Term> for LinExpr {
    fn from(t: &Term) -> Self {
        LinExpr {
            constant: t.constant as i128,
            coeffs: t.coeffs.iter().map(|(v, c)| (v.clone(), *c as i128)).collect(),
        }
    }
}

impl From<&ExtTerm> for LinExpr {
    fn from(t: &ExtTerm) -> Self {
        LinExpr::from(&t.plus).sub(&LinExpr::from(&t.minus))
    }
}

/// Extended term `plus - minus`, only used while translating.
///
/// No cancellation is performed: `x + (5 - 3)` stays `(x + 5) - 3`, and the
/// subtracted part is moved across the relation by [`normalize_atom`].
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExtTerm {
    pub plus: Term,
    pub minus: Term,
}

impl ExtTerm {
    pub fn new(plus: Term, minus: Term) -> Self {
        ExtTerm { plus, minus }
    }

    pub fn is_surface(&self) -> bool {
        self.minus.is_zero()
    }

    /// `self + other`
    pub fn add(&self, other: &ExtTerm) -> ExtTerm {
        ExtTerm {
            plus: &self.plus + &other.plus,
            minus: &self.minus + &other.minus,
        }
    }

    /// `self - other`
    pub fn sub(&self, other: &ExtTerm) -> ExtTerm {
        ExtTerm {
            plus: &self.plus + &other.minus,
            minus: &self.minus + &other.plus,
        }
    }

    pub fn offset(&self, c: u64) -> ExtTerm {
        ExtTerm {
            plus: self.plus.offset(c),
            minus: self.minus.clone(),
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.plus.vars().chain(self.minus.vars())
    }

    pub fn eval(&self, value_of: &dyn Fn(&Var) -> i128) -> i128 {
        self.plus.eval(value_of) - self.minus.eval(value_of)
    }
}

impl From<Term> for ExtTerm {
    fn from(t: Term) -> Self {
        ExtTerm {
            plus: t,
            minus: Term::zero(),
        }
    }
}

impl From<&Term> for ExtTerm {
    fn from(t: &Term) -> Self {
        ExtTerm::from(t.clone())
    }
}

impl fmt::Debug for ExtTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ExtTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_surface() {
            write!(f, "{}", self.plus)
        } else {
            write!(f, "({} - {})", self.plus, self.minus)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Eq,
    Neq,
    Lt,
    Le,
}

impl Rel {
    pub fn holds(self, l: i128, r: i128) -> bool {
        match self {
            Rel::Eq => l == r,
            Rel::Neq => l != r,
            Rel::Lt => l < r,
            Rel::Le => l <= r,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Neq => "!=",
            Rel::Lt => "<",
            Rel::Le => "<=",
        }
    }
}

/// `lhs rel rhs` over surface terms.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PureAtom {
    pub rel: Rel,
    pub lhs: Term,
    pub rhs: Term,
}

impl PureAtom {
    pub fn new(rel: Rel, lhs: impl Into<Term>, rhs: impl Into<Term>) -> Self {
        PureAtom {
            rel,
            lhs: lhs.into(),
            rhs: rhs.into(),
        }
    }

    pub fn eval(&self, value_of: &dyn Fn(&Var) -> i128) -> bool {
        self.rel.holds(self.lhs.eval(value_of), self.rhs.eval(value_of))
    }

    /// `lhs - rhs`, used for constant folding.
    pub fn difference(&self) -> LinExpr {
        self.lhs.minus(&self.rhs)
    }
}

impl fmt::Debug for PureAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for PureAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.rel.symbol(), self.rhs)
    }
}

/// An atom over extended terms, before elimination of subtractions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtAtom {
    pub rel: Rel,
    pub lhs: ExtTerm,
    pub rhs: ExtTerm,
}

impl ExtAtom {
    pub fn new(rel: Rel, lhs: impl Into<ExtTerm>, rhs: impl Into<ExtTerm>) -> Self {
        ExtAtom {
            rel,
            lhs: lhs.into(),
            rhs: rhs.into(),
        }
    }
}

/// Move every subtracted part to the opposite side of the relation:
/// `t' + (u - t) rel t''` becomes `t' + u rel t'' + t`.
pub fn normalize_atom(a: &ExtAtom) -> PureAtom {
    PureAtom {
        rel: a.rel,
        lhs: &a.lhs.plus + &a.rhs.minus,
        rhs: &a.rhs.plus + &a.lhs.minus,
    }
}

/// Presburger formula. Quantifiers range over the naturals.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum PureFormula {
    True,
    False,
    Atom(PureAtom),
    And(Vec<PureFormula>),
    Or(Vec<PureFormula>),
    Not(Box<PureFormula>),
    Implies(Box<PureFormula>, Box<PureFormula>),
    Exists(Var, Box<PureFormula>),
    Forall(Var, Box<PureFormula>),
}

impl PureFormula {
    pub fn atom(rel: Rel, lhs: impl Into<Term>, rhs: impl Into<Term>) -> Self {
        PureFormula::Atom(PureAtom::new(rel, lhs, rhs))
    }

    pub fn eq(lhs: impl Into<Term>, rhs: impl Into<Term>) -> Self {
        Self::atom(Rel::Eq, lhs, rhs)
    }

    pub fn lt(lhs: impl Into<Term>, rhs: impl Into<Term>) -> Self {
        Self::atom(Rel::Lt, lhs, rhs)
    }

    pub fn le(lhs: impl Into<Term>, rhs: impl Into<Term>) -> Self {
        Self::atom(Rel::Le, lhs, rhs)
    }

    pub fn neq(lhs: impl Into<Term>, rhs: impl Into<Term>) -> Self {
        Self::atom(Rel::Neq, lhs, rhs)
    }

    /// Atom over extended terms, normalized on the way in.
    pub fn ext(rel: Rel, lhs: impl Into<ExtTerm>, rhs: impl Into<ExtTerm>) -> Self {
        PureFormula::Atom(normalize_atom(&ExtAtom::new(rel, lhs, rhs)))
    }

    /// `self ∧ other`, appending to an existing conjunction on the left.
    pub fn and(self, other: PureFormula) -> PureFormula {
        match self {
            PureFormula::And(mut cs) => {
                cs.push(other);
                PureFormula::And(cs)
            }
            f => PureFormula::And(vec![f, other]),
        }
    }

    pub fn conj(parts: Vec<PureFormula>) -> PureFormula {
        PureFormula::And(parts)
    }

    pub fn disj(parts: Vec<PureFormula>) -> PureFormula {
        PureFormula::Or(parts)
    }

    pub fn not(f: PureFormula) -> PureFormula {
        PureFormula::Not(Box::new(f))
    }

    pub fn implies(a: PureFormula, b: PureFormula) -> PureFormula {
        PureFormula::Implies(Box::new(a), Box::new(b))
    }

    pub fn exists(v: Var, body: PureFormula) -> PureFormula {
        PureFormula::Exists(v, Box::new(body))
    }

    pub fn forall(v: Var, body: PureFormula) -> PureFormula {
        PureFormula::Forall(v, Box::new(body))
    }

    /// Conjuncts when viewed as a flat conjunction (nested `And`s are flattened).
    pub fn conjuncts(&self) -> Vec<&PureFormula> {
        let mut out = Vec::new();
        fn go<'a>(f: &'a PureFormula, out: &mut Vec<&'a PureFormula>) {
            match f {
                PureFormula::And(cs) => cs.iter().for_each(|c| go(c, out)),
                PureFormula::True => {}
                f => out.push(f),
            }
        }
        go(self, &mut out);
        out
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            PureFormula::True | PureFormula::False | PureFormula::Atom(_) => 1,
            PureFormula::And(cs) | PureFormula::Or(cs) => 1 + cs.iter().map(|c| c.size()).sum::<usize>(),
            PureFormula::Not(f) | PureFormula::Exists(_, f) | PureFormula::Forall(_, f) => 1 + f.size(),
            PureFormula::Implies(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            PureFormula::True | PureFormula::False | PureFormula::Atom(_) => true,
            PureFormula::And(cs) | PureFormula::Or(cs) => cs.iter().all(|c| c.is_quantifier_free()),
            PureFormula::Not(f) => f.is_quantifier_free(),
            PureFormula::Implies(a, b) => a.is_quantifier_free() && b.is_quantifier_free(),
            PureFormula::Exists(..) | PureFormula::Forall(..) => false,
        }
    }

    /// All variable names occurring anywhere, bound or free.
    pub fn all_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            PureFormula::True | PureFormula::False => {}
            PureFormula::Atom(a) => out.extend(a.lhs.vars().chain(a.rhs.vars()).cloned()),
            PureFormula::And(cs) | PureFormula::Or(cs) => cs.iter().for_each(|c| c.all_vars(out)),
            PureFormula::Not(f) => f.all_vars(out),
            PureFormula::Implies(a, b) => {
                a.all_vars(out);
                b.all_vars(out);
            }
            PureFormula::Exists(v, f) | PureFormula::Forall(v, f) => {
                out.insert(v.clone());
                f.all_vars(out);
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, nested: bool) -> fmt::Result {
        let open = |f: &mut fmt::Formatter<'_>| if nested { f.write_str("(") } else { Ok(()) };
        let close = |f: &mut fmt::Formatter<'_>| if nested { f.write_str(")") } else { Ok(()) };
        match self {
            PureFormula::True => f.write_str("true"),
            PureFormula::False => f.write_str("false"),
            PureFormula::Atom(a) => write!(f, "{}", a),
            PureFormula::And(cs) | PureFormula::Or(cs) if cs.is_empty() => {
                f.write_str(if matches!(self, PureFormula::And(_)) { "true" } else { "false" })
            }
            PureFormula::And(cs) | PureFormula::Or(cs) => {
                let sep = if matches!(self, PureFormula::And(_)) { " & " } else { " | " };
                if cs.len() > 1 {
                    open(f)?;
                }
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    c.fmt_prec(f, true)?;
                }
                if cs.len() > 1 {
                    close(f)?;
                }
                Ok(())
            }
            PureFormula::Not(g) => {
                f.write_str("~")?;
                g.fmt_prec(f, true)
            }
            PureFormula::Implies(a, b) => {
                open(f)?;
                a.fmt_prec(f, true)?;
                f.write_str(" -> ")?;
                b.fmt_prec(f, true)?;
                close(f)
            }
            PureFormula::Exists(v, g) | PureFormula::Forall(v, g) => {
                open(f)?;
                let q = if matches!(self, PureFormula::Exists(..)) { "Ex" } else { "All" };
                write!(f, "{} {}. ", q, v)?;
                g.fmt_prec(f, false)?;
                close(f)
            }
        }
    }
}

impl fmt::Debug for PureFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for PureFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Top-level conjunctions of atoms print in the input syntax.
        if let PureFormula::And(cs) = self {
            if !cs.is_empty() && cs.iter().all(|c| matches!(c, PureFormula::Atom(_))) {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" & ")?;
                    }
                    write!(f, "{}", c)?;
                }
                return Ok(());
            }
        }
        self.fmt_prec(f, false)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpatialAtom<T = Term> {
    Emp,
    PointsTo(T, T),
    Arr(T, T),
}

impl<T> SpatialAtom<T> {
    pub fn is_emp(&self) -> bool {
        matches!(self, SpatialAtom::Emp)
    }

    /// First address, if the atom occupies memory.
    pub fn address(&self) -> Option<&T> {
        match self {
            SpatialAtom::Emp => None,
            SpatialAtom::PointsTo(a, _) | SpatialAtom::Arr(a, _) => Some(a),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> SpatialAtom<U> {
        match self {
            SpatialAtom::Emp => SpatialAtom::Emp,
            SpatialAtom::PointsTo(a, b) => SpatialAtom::PointsTo(f(a), f(b)),
            SpatialAtom::Arr(a, b) => SpatialAtom::Arr(f(a), f(b)),
        }
    }
}

impl SpatialAtom<Term> {
    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        let (a, b): (Option<&Term>, Option<&Term>) = match self {
            SpatialAtom::Emp => (None, None),
            SpatialAtom::PointsTo(a, b) | SpatialAtom::Arr(a, b) => (Some(a), Some(b)),
        };
        a.into_iter().chain(b).flat_map(|t| t.vars())
    }
}

impl<T: fmt::Display> fmt::Debug for SpatialAtom<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl<T: fmt::Display> fmt::Display for SpatialAtom<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpatialAtom::Emp => f.write_str("emp"),
            SpatialAtom::PointsTo(a, b) => write!(f, "{} -> {}", a, b),
            SpatialAtom::Arr(a, b) => write!(f, "Arr({}, {})", a, b),
        }
    }
}

/// Spatial formula as an ordered list of atoms joined by `*`.
/// The empty list and `[emp]` both denote the empty heap.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sigma<T = Term> {
    pub atoms: Vec<SpatialAtom<T>>,
}

impl<T> Sigma<T> {
    pub fn new(atoms: Vec<SpatialAtom<T>>) -> Self {
        Sigma { atoms }
    }

    pub fn emp() -> Self {
        Sigma { atoms: Vec::new() }
    }

    /// Number of `*` symbols.
    pub fn star_count(&self) -> usize {
        self.atoms.len().saturating_sub(1)
    }

    /// True when every atom is `emp`.
    pub fn is_emp(&self) -> bool {
        self.atoms.iter().all(|a| a.is_emp())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Sigma<U> {
        Sigma {
            atoms: self.atoms.iter().map(|a| a.map(&mut f)).collect(),
        }
    }
}

impl<T> From<Vec<SpatialAtom<T>>> for Sigma<T> {
    fn from(atoms: Vec<SpatialAtom<T>>) -> Self {
        Sigma { atoms }
    }
}

impl<T: fmt::Display> fmt::Debug for Sigma<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl<T: fmt::Display> fmt::Display for Sigma<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("emp");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" * ")?;
            }
            write!(f, "{}", a)?;
        }
        Ok(())
    }
}

/// `∃ex_vars (pure ∧ spatial)`
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SymbolicHeap {
    pub ex_vars: Vec<Var>,
    pub pure: PureFormula,
    pub spatial: Sigma,
}

impl SymbolicHeap {
    pub fn new(pure: PureFormula, spatial: Sigma) -> Self {
        SymbolicHeap {
            ex_vars: Vec::new(),
            pure,
            spatial,
        }
    }

    pub fn spatial(spatial: Vec<SpatialAtom>) -> Self {
        SymbolicHeap::new(PureFormula::True, Sigma::new(spatial))
    }

    pub fn with_ex_vars(mut self, vars: Vec<Var>) -> Self {
        self.ex_vars = vars;
        self
    }

    pub fn is_quantifier_free(&self) -> bool {
        self.ex_vars.is_empty()
    }

    pub fn all_vars(&self, out: &mut BTreeSet<Var>) {
        out.extend(self.ex_vars.iter().cloned());
        self.pure.all_vars(out);
        for a in &self.spatial.atoms {
            out.extend(a.vars().cloned());
        }
    }
}

impl fmt::Debug for SymbolicHeap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for SymbolicHeap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.ex_vars.is_empty() {
            f.write_str("Ex")?;
            for v in &self.ex_vars {
                write!(f, " {}", v)?;
            }
            f.write_str(". ")?;
        }
        if !matches!(self.pure, PureFormula::True) && !self.pure.conjuncts().is_empty() {
            write!(f, "{} & ", self.pure)?;
        }
        write!(f, "{}", self.spatial)
    }
}

/// `antecedent ⊢ succedent_1, ..., succedent_k`
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Entailment {
    pub antecedent: SymbolicHeap,
    pub succedents: Vec<SymbolicHeap>,
}

impl Entailment {
    pub fn new(antecedent: SymbolicHeap, succedents: Vec<SymbolicHeap>) -> Self {
        Entailment {
            antecedent,
            succedents,
        }
    }

    pub fn all_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.antecedent.all_vars(&mut out);
        for s in &self.succedents {
            s.all_vars(&mut out);
        }
        out
    }

    /// Alpha-equivalence up to renaming of succedent binders.
    pub fn alpha_equivalent(&self, other: &Entailment) -> bool {
        self.canonical_binders() == other.canonical_binders()
    }

    fn canonical_binders(&self) -> Entailment {
        let mut e = self.clone();
        for (i, s) in e.succedents.iter_mut().enumerate() {
            let mut bindings = BTreeMap::new();
            let new_vars: Vec<Var> = s
                .ex_vars
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let nv = Var::new(&format!("#{}_{}", i, j));
                    bindings.insert(v.clone(), Term::var(nv.clone()));
                    nv
                })
                .collect();
            s.pure = s.pure.substitute(&bindings);
            s.spatial = s.spatial.substitute(&bindings);
            s.ex_vars = new_vars;
        }
        e
    }
}

impl fmt::Debug for Entailment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Entailment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |- ", self.antecedent)?;
        for (i, s) in self.succedents.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", s)?;
        }
        Ok(())
    }
}

/// Free variable computation.
pub trait FreeVars {
    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>);

    fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }
}

impl FreeVars for Term {
    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        out.extend(self.vars().filter(|v| !bound.contains(v)).cloned());
    }
}

impl FreeVars for PureFormula {
    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        match self {
            PureFormula::True | PureFormula::False => {}
            PureFormula::Atom(a) => {
                a.lhs.collect_free(bound, out);
                a.rhs.collect_free(bound, out);
            }
            PureFormula::And(cs) | PureFormula::Or(cs) => cs.iter().for_each(|c| c.collect_free(bound, out)),
            PureFormula::Not(f) => f.collect_free(bound, out),
            PureFormula::Implies(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            PureFormula::Exists(v, f) | PureFormula::Forall(v, f) => {
                bound.push(v.clone());
                f.collect_free(bound, out);
                bound.pop();
            }
        }
    }
}

impl FreeVars for Sigma {
    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        for a in &self.atoms {
            out.extend(a.vars().filter(|v| !bound.contains(v)).cloned());
        }
    }
}

impl FreeVars for SymbolicHeap {
    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        let depth = bound.len();
        bound.extend(self.ex_vars.iter().cloned());
        self.pure.collect_free(bound, out);
        self.spatial.collect_free(bound, out);
        bound.truncate(depth);
    }
}

impl FreeVars for Entailment {
    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        self.antecedent.collect_free(bound, out);
        for s in &self.succedents {
            s.collect_free(bound, out);
        }
    }
}

/// Capture-avoiding simultaneous substitution.
pub trait Substitute: Sized {
    fn substitute(&self, bindings: &BTreeMap<Var, Term>) -> Self;
}

impl Substitute for Term {
    fn substitute(&self, bindings: &BTreeMap<Var, Term>) -> Self {
        Term::substitute(self, bindings)
    }
}

impl Substitute for PureAtom {
    fn substitute(&self, bindings: &BTreeMap<Var, Term>) -> Self {
        PureAtom {
            rel: self.rel,
            lhs: self.lhs.substitute(bindings),
            rhs: self.rhs.substitute(bindings),
        }
    }
}

impl Substitute for Sigma {
    fn substitute(&self, bindings: &BTreeMap<Var, Term>) -> Self {
        self.map(|t| t.substitute(bindings))
    }
}

impl Substitute for PureFormula {
    fn substitute(&self, bindings: &BTreeMap<Var, Term>) -> Self {
        match self {
            PureFormula::True => PureFormula::True,
            PureFormula::False => PureFormula::False,
            PureFormula::Atom(a) => PureFormula::Atom(a.substitute(bindings)),
            PureFormula::And(cs) => PureFormula::And(cs.iter().map(|c| c.substitute(bindings)).collect()),
            PureFormula::Or(cs) => PureFormula::Or(cs.iter().map(|c| c.substitute(bindings)).collect()),
            PureFormula::Not(f) => PureFormula::not(f.substitute(bindings)),
            PureFormula::Implies(a, b) => PureFormula::implies(a.substitute(bindings), b.substitute(bindings)),
            PureFormula::Exists(v, body) | PureFormula::Forall(v, body) => {
                let is_exists = matches!(self, PureFormula::Exists(..));
                let body_free = body.free_vars();
                let mut inner: BTreeMap<Var, Term> = bindings
                    .iter()
                    .filter(|(k, _)| *k != v && body_free.contains(*k))
                    .map(|(k, t)| (k.clone(), t.clone()))
                    .collect();
                let captures = inner.values().any(|t| t.coeff(v) > 0);
                let (binder, body) = if captures {
                    let mut avoid = body_free.clone();
                    body.all_vars(&mut avoid);
                    for (k, t) in &inner {
                        avoid.insert(k.clone());
                        avoid.extend(t.vars().cloned());
                    }
                    let fresh = prime_until_fresh(v, &avoid);
                    inner.insert(v.clone(), Term::var(fresh.clone()));
                    (fresh, body.substitute(&inner))
                } else {
                    (v.clone(), body.substitute(&inner))
                };
                if is_exists {
                    PureFormula::exists(binder, body)
                } else {
                    PureFormula::forall(binder, body)
                }
            }
        }
    }
}

fn prime_until_fresh(v: &Var, avoid: &BTreeSet<Var>) -> Var {
    let mut name = String::from(v.name());
    loop {
        name.push('\'');
        let cand = Var::new(&name);
        if !avoid.contains(&cand) {
            return cand;
        }
    }
}

/// All orderings of `items`, in lexicographic order of the index sequence.
pub fn permutations_of<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    let mut out = Vec::new();
    loop {
        out.push(idx.iter().map(|&i| items[i].clone()).collect());
        // next lexicographic permutation
        let Some(k) = (1..idx.len()).rev().find(|&k| idx[k - 1] < idx[k]).map(|k| k - 1) else {
            break;
        };
        let l = (k + 1..idx.len()).rev().find(|&l| idx[k] < idx[l]).unwrap();
        idx.swap(k, l);
        idx[k + 1..].reverse();
    }
    out
}

/// Every reordering of the spatial part; other fields unchanged.
pub fn permutations(phi: &SymbolicHeap) -> Vec<SymbolicHeap> {
    permutations_of(&phi.spatial.atoms)
        .into_iter()
        .map(|atoms| SymbolicHeap {
            ex_vars: phi.ex_vars.clone(),
            pure: phi.pure.clone(),
            spatial: Sigma::new(atoms),
        })
        .collect()
}
