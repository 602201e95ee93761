//! The end-to-end decision procedure.

use alloc::vec::Vec;
use core::fmt;

use crate::backend::{decide_validity, Backend, BackendVerdict, UnknownReason};
use crate::optimizer::{antecedent_unsat, apply_frame_rule, prune_succedents};
use crate::semantics::{oracle_search, Countermodel};
use crate::sorted::{decompose_iter, sorted_count};
use crate::syntax::Entailment;
use crate::translation::{build_validity_formula, build_validity_formula_interruptible, check_condition, ClosedFormula, ConditionReport, TranslateError, TranslateOptions};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Unsatisfiability pruning of succedents and antecedents.
    pub enable_u: bool,
    /// The invertible frame rule.
    pub enable_f: bool,
    pub enable_simplify: bool,
    /// Bounds for an oracle countermodel on invalid entailments.
    pub oracle_bounds: Option<(u64, u64)>,
    /// Translation nodes allowed per sorted entailment.
    pub node_budget: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            enable_u: true,
            enable_f: true,
            enable_simplify: false,
            oracle_bounds: None,
            node_budget: Some(200_000),
        }
    }
}

/// The failing sorted entailment and, when the oracle found one, a heap
/// witnessing invalidity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub sorted_index: usize,
    pub countermodel: Option<Countermodel>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid(Witness),
    ConditionViolation(ConditionReport),
    Unknown(UnknownReason),
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Valid => "valid",
            Verdict::Invalid(_) => "invalid",
            Verdict::ConditionViolation(_) => "condition-violation",
            Verdict::Unknown(_) => "unknown",
        }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }

    pub fn is_invalid(&self) -> bool {
        matches!(self, Verdict::Invalid(_))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Valid | Verdict::Invalid(_) => f.write_str(self.label()),
            Verdict::ConditionViolation(r) => write!(f, "condition-violation ({})", r),
            Verdict::Unknown(r) => write!(f, "unknown ({})", r),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    /// Sorted entailments produced by the decomposition.
    pub permutations: usize,
    pub pruned: usize,
    pub frames_removed: usize,
    pub solver_calls: usize,
    pub translation_nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub verdict: Verdict,
    pub stats: Stats,
}

struct Counting<'a> {
    inner: &'a mut dyn Backend,
    calls: usize,
}

impl Backend for Counting<'_> {
    fn check_sat(&mut self, q: &crate::backend::Query) -> crate::backend::SatAnswer {
        self.calls += 1;
        self.inner.check_sat(q)
    }

    fn interrupted(&self) -> bool {
        self.inner.interrupted()
    }
}

/// Decides `e`. Sorted entailments are checked in order and the first
/// invalid one ends the run.
pub fn decide(e: &Entailment, opts: &RunOptions, backend: &mut dyn Backend) -> Outcome {
    let mut backend = Counting { inner: backend, calls: 0 };
    let mut stats = Stats::default();
    let verdict = run(e, opts, &mut backend, &mut stats);
    stats.solver_calls = backend.calls;
    Outcome { verdict, stats }
}

/// Every closed formula the run would send to the backend, without sending
/// them. Optimizations that need the solver are skipped.
pub fn validity_formulas(e: &Entailment, opts: &RunOptions) -> Result<Vec<ClosedFormula>, TranslateError> {
    let report = check_condition(e);
    if !report.ok() {
        return Err(TranslateError::Condition(report));
    }
    let e = if opts.enable_f { apply_frame_rule(e).0 } else { e.clone() };
    let topts = translate_options(opts);
    decompose_iter(&e)
        .map(|se| build_validity_formula(&se, &topts).map(|(f, _)| f))
        .collect()
}

fn translate_options(opts: &RunOptions) -> TranslateOptions {
    TranslateOptions {
        simplify: opts.enable_simplify,
        node_budget: opts.node_budget,
        trace: false,
    }
}

fn run(e: &Entailment, opts: &RunOptions, backend: &mut Counting<'_>, stats: &mut Stats) -> Verdict {
    let report = check_condition(e);
    if !report.ok() {
        return Verdict::ConditionViolation(report);
    }
    let framed = if opts.enable_f {
        let (framed, n) = apply_frame_rule(e);
        stats.frames_removed = n;
        framed
    } else {
        e.clone()
    };
    if opts.enable_u && antecedent_unsat(&framed.antecedent, backend) {
        return Verdict::Valid;
    }
    stats.permutations = sorted_count(&framed);
    let topts = translate_options(opts);
    let mut unknown = None;
    for mut se in decompose_iter(&framed) {
        if backend.interrupted() {
            return Verdict::Unknown(UnknownReason::Timeout);
        }
        if opts.enable_u {
            if antecedent_unsat(&se.antecedent, backend) {
                continue;
            }
            let (kept, log) = prune_succedents(&se.antecedent, &se.succedents, backend);
            stats.pruned += log.dropped.len();
            se.retain_succedents(|k| kept.contains(&k));
        }
        let interrupt = || backend.interrupted();
        let formula = match build_validity_formula_interruptible(&se, &topts, &interrupt) {
            Ok((f, tr)) => {
                stats.translation_nodes += tr.nodes;
                f
            }
            Err(TranslateError::Condition(r)) => return Verdict::ConditionViolation(r),
            Err(TranslateError::Interrupted { nodes }) => {
                stats.translation_nodes += nodes;
                return Verdict::Unknown(UnknownReason::Timeout);
            }
            Err(TranslateError::BudgetExceeded { nodes }) => {
                stats.translation_nodes += nodes;
                unknown.get_or_insert(UnknownReason::Timeout);
                continue;
            }
        };
        match decide_validity(backend, &formula) {
            BackendVerdict::Valid => {}
            BackendVerdict::Invalid => {
                let countermodel = opts.oracle_bounds.and_then(|(sb, vb)| oracle_search(e, sb, vb));
                return Verdict::Invalid(Witness {
                    sorted_index: se.index,
                    countermodel,
                });
            }
            BackendVerdict::Unknown(r) => {
                unknown.get_or_insert(r);
            }
        }
    }
    match unknown {
        Some(r) => Verdict::Unknown(r),
        None => Verdict::Valid,
    }
}
