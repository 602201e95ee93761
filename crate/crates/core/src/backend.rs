//! Deciding closed Presburger formulas: SMT-LIB emission, the solver
//! interface, and a bounded evaluator for tests.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use crate::semantics::{eval_pure, Odometer, Store};
use crate::syntax::{FreeVars, PureFormula, Rel, Term, Var};
use crate::translation::ClosedFormula;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum UnknownReason {
    Timeout,
    SolverError(String),
    Unsupported,
}

impl fmt::Display for UnknownReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnknownReason::Timeout => f.write_str("timeout"),
            UnknownReason::SolverError(m) if m.is_empty() => f.write_str("solver error"),
            UnknownReason::SolverError(m) => write!(f, "solver error: {}", m),
            UnknownReason::Unsupported => f.write_str("unsupported"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SatAnswer {
    Sat,
    Unsat,
    Unknown(UnknownReason),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BackendVerdict {
    Valid,
    Invalid,
    Unknown(UnknownReason),
}

/// A satisfiability question: is there a natural-number assignment to
/// `declared` making `assertion` true?
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub declared: Vec<Var>,
    pub assertion: PureFormula,
    /// The same question as an SMT-LIB script.
    pub script: String,
}

impl Query {
    /// The negation of `f`; unsatisfiable exactly when `f` is valid.
    pub fn validity(f: &ClosedFormula) -> Self {
        let mut inner = f.body.clone();
        for y in f.existential.iter().rev() {
            inner = PureFormula::exists(y.clone(), inner);
        }
        Query {
            declared: f.universal.clone(),
            assertion: PureFormula::not(inner),
            script: emit_smtlib(f),
        }
    }

    /// Existential closure of `f` over its free variables.
    pub fn satisfiable(f: &PureFormula) -> Self {
        let declared: Vec<Var> = f.free_vars().into_iter().collect();
        Query {
            script: emit_script(&declared, f),
            declared,
            assertion: f.clone(),
        }
    }
}

/// Anything that can answer satisfiability queries.
pub trait Backend {
    fn check_sat(&mut self, q: &Query) -> SatAnswer;

    /// Asks callers to stop issuing queries, e.g. once a deadline has passed.
    fn interrupted(&self) -> bool {
        false
    }
}

impl<B: Backend + ?Sized> Backend for &mut B {
    fn check_sat(&mut self, q: &Query) -> SatAnswer {
        (**self).check_sat(q)
    }

    fn interrupted(&self) -> bool {
        (**self).interrupted()
    }
}

/// Validity of `f` as unsatisfiability of its negation.
pub fn decide_validity(backend: &mut dyn Backend, f: &ClosedFormula) -> BackendVerdict {
    match backend.check_sat(&Query::validity(f)) {
        SatAnswer::Unsat => BackendVerdict::Valid,
        SatAnswer::Sat => BackendVerdict::Invalid,
        SatAnswer::Unknown(r) => BackendVerdict::Unknown(r),
    }
}

/// Maps the first token of a solver's output to an answer.
pub fn parse_answer(output: &str) -> SatAnswer {
    match output.split_whitespace().next() {
        Some("sat") => SatAnswer::Sat,
        Some("unsat") => SatAnswer::Unsat,
        Some("unknown") => SatAnswer::Unknown(UnknownReason::Unsupported),
        Some("timeout") => SatAnswer::Unknown(UnknownReason::Timeout),
        _ => SatAnswer::Unknown(UnknownReason::SolverError(output.trim().into())),
    }
}

/// Evaluates `f` with every quantifier restricted to `0..=bound`.
pub fn bounded_eval(f: &ClosedFormula, bound: u64) -> bool {
    eval_pure(&Store::new(), &f.to_formula(), bound)
}

/// Answers queries by enumerating assignments up to a bound. Only a
/// refutation-sound stand-in for a solver, meant for tests.
#[derive(Clone, Debug)]
pub struct BoundedBackend {
    pub bound: u64,
    pub calls: usize,
}

impl BoundedBackend {
    pub fn new(bound: u64) -> Self {
        BoundedBackend { bound, calls: 0 }
    }
}

impl Backend for BoundedBackend {
    fn check_sat(&mut self, q: &Query) -> SatAnswer {
        self.calls += 1;
        let found = Odometer::new(q.declared.len(), self.bound).any(|vals| {
            let s: Store = q.declared.iter().cloned().zip(vals).collect();
            eval_pure(&s, &q.assertion, self.bound)
        });
        if found {
            SatAnswer::Sat
        } else {
            SatAnswer::Unsat
        }
    }
}

/// SMT-LIB script asserting the negation of `f`: `sat` means invalid,
/// `unsat` means valid. Every variable is constrained to be non-negative.
pub fn emit_smtlib(f: &ClosedFormula) -> String {
    let mut inner = f.body.clone();
    for y in f.existential.iter().rev() {
        inner = PureFormula::exists(y.clone(), inner);
    }
    emit_script(&f.universal, &PureFormula::not(inner))
}

fn emit_script(declared: &[Var], assertion: &PureFormula) -> String {
    let mut out = String::from("(set-logic LIA)\n");
    for v in declared {
        let _ = writeln!(out, "(declare-const {} Int)", symbol(v));
    }
    for v in declared {
        let _ = writeln!(out, "(assert (>= {} 0))", symbol(v));
    }
    out.push_str("(assert ");
    write_formula(&mut out, assertion);
    out.push_str(")\n(check-sat)\n");
    out
}

const RESERVED: &[&str] = &[
    "and", "or", "not", "xor", "let", "exists", "forall", "true", "false", "distinct", "ite", "par", "as", "Int",
    "Bool", "div", "mod", "abs", "NUMERAL", "DECIMAL", "STRING", "BINARY", "HEXADECIMAL",
];

fn is_simple(name: &str) -> bool {
    let mut chars = name.chars();
    let Some(first) = chars.next() else { return false };
    (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || "_$~.".contains(c))
        && !RESERVED.contains(&name)
}

/// The SMT-LIB symbol for `v`, quoted when needed.
pub fn symbol(v: &Var) -> String {
    if is_simple(v.name()) {
        v.name().into()
    } else {
        let mut s = String::from("|");
        s.push_str(v.name());
        s.push('|');
        s
    }
}

fn write_term(out: &mut String, t: &Term) {
    let mut parts: Vec<String> = Vec::new();
    for (v, c) in t.coeffs() {
        if c == 1 {
            parts.push(symbol(v));
        } else {
            let mut s = String::new();
            let _ = write!(s, "(* {} {})", c, symbol(v));
            parts.push(s);
        }
    }
    if t.constant_part() != 0 || parts.is_empty() {
        let mut s = String::new();
        let _ = write!(s, "{}", t.constant_part());
        parts.push(s);
    }
    if parts.len() == 1 {
        out.push_str(&parts[0]);
    } else {
        out.push_str("(+");
        for p in parts {
            out.push(' ');
            out.push_str(&p);
        }
        out.push(')');
    }
}

fn write_binder(out: &mut String, q: &str, v: &Var, body: &PureFormula) {
    let sym = symbol(v);
    let _ = write!(out, "({} (({} Int)) ({} (>= {} 0) ", q, sym, if q == "forall" { "=>" } else { "and" }, sym);
    write_formula(out, body);
    out.push_str("))");
}

fn write_formula(out: &mut String, f: &PureFormula) {
    match f {
        PureFormula::True => out.push_str("true"),
        PureFormula::False => out.push_str("false"),
        PureFormula::Atom(a) => {
            let op = match a.rel {
                Rel::Eq | Rel::Neq => "=",
                Rel::Lt => "<",
                Rel::Le => "<=",
            };
            if a.rel == Rel::Neq {
                out.push_str("(not ");
            }
            let _ = write!(out, "({} ", op);
            write_term(out, &a.lhs);
            out.push(' ');
            write_term(out, &a.rhs);
            out.push(')');
            if a.rel == Rel::Neq {
                out.push(')');
            }
        }
        PureFormula::And(cs) | PureFormula::Or(cs) => {
            let is_and = matches!(f, PureFormula::And(_));
            match cs.len() {
                0 => out.push_str(if is_and { "true" } else { "false" }),
                1 => write_formula(out, &cs[0]),
                _ => {
                    out.push_str(if is_and { "(and" } else { "(or" });
                    for c in cs {
                        out.push(' ');
                        write_formula(out, c);
                    }
                    out.push(')');
                }
            }
        }
        PureFormula::Not(g) => {
            out.push_str("(not ");
            write_formula(out, g);
            out.push(')');
        }
        PureFormula::Implies(a, b) => {
            out.push_str("(=> ");
            write_formula(out, a);
            out.push(' ');
            write_formula(out, b);
            out.push(')');
        }
        PureFormula::Exists(v, g) => write_binder(out, "exists", v, g),
        PureFormula::Forall(v, g) => write_binder(out, "forall", v, g),
    }
}
