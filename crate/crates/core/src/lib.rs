//! Decision procedure for entailments between symbolic heaps with arrays.
//!
//! An entailment is split into sorted entailments (one per ordering of the
//! antecedent's spatial atoms), each sorted entailment is translated into a
//! closed Presburger formula, and the formulas are decided by an SMT backend
//! supplied through the [`backend::Backend`] trait.
//!
//! The crate is `no_std` and only needs `alloc`; process management, parsing
//! and file formats live in the `slar` crate.

#![no_std]

extern crate alloc;

pub mod backend;
pub mod optimizer;
pub mod pipeline;
pub mod semantics;
pub mod sorted;
pub mod syntax;
pub mod translation;

pub use pipeline::{decide, Outcome, RunOptions, Stats, Verdict};
pub use syntax::{Entailment, PureFormula, Sigma, SpatialAtom, SymbolicHeap, Term, Var};
