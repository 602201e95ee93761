//! Solver processes, the concrete syntax, benchmark generation and batch
//! reporting for the `slar` entailment checker.

pub mod batch;
pub mod bench;
pub mod parser;
pub mod solver;

pub use batch::{run_batch, BatchOptions, Report};
pub use bench::{generate_bench, generate_entries, BenchSpec, Family};
pub use parser::{parse_entailment, parse_file, InputFile, ParseError};
pub use solver::{SolverBackend, SolverConfig};
