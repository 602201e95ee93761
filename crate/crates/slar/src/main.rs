use std::fs;
use std::io::{self, Read};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, ValueEnum};

use slar::batch::{run_batch, BatchOptions, DeadlineBackend};
use slar::bench::{generate_bench, BenchSpec, Family};
use slar::parser::{parse_entailment, parse_file, InputFile};
use slar::solver::{SolverBackend, SolverConfig};
use slar_core::pipeline::{decide, RunOptions, Verdict};

const EXIT_VALID: u8 = 0;
const EXIT_INVALID: u8 = 1;
const EXIT_CONDITION: u8 = 2;
const EXIT_UNKNOWN: u8 = 3;
const EXIT_USAGE: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Entailment checker for separation logic with arrays.
///
/// Checks one entailment given with `-e`, or every `name: entailment` line
/// of FILE (`-` for standard input), or a generated benchmark family.
#[derive(Debug, Parser)]
#[command(name = "slar", version)]
struct Cli {
    /// File of named entailments.
    file: Option<PathBuf>,
    /// A single entailment; the exit code reports its verdict.
    #[arg(short = 'e', long = "entailment", conflicts_with_all = ["file", "bench"])]
    entailment: Option<String>,
    /// Disable unsatisfiability pruning.
    #[arg(long)]
    no_u: bool,
    /// Disable the frame rule.
    #[arg(long)]
    no_f: bool,
    /// Simplify formulas during translation.
    #[arg(long)]
    simplify: bool,
    /// SMT solver executable (default: $SLAR_SOLVER, then z3).
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Extra solver argument, repeatable. Replaces the defaults.
    #[arg(long = "solver-arg", allow_hyphen_values = true)]
    solver_args: Vec<String>,
    /// Per-query solver timeout.
    #[arg(long, default_value_t = 10_000)]
    timeout_ms: u64,
    /// Wall-clock limit per entailment.
    #[arg(long)]
    entailment_timeout_ms: Option<u64>,
    /// Start a new solver process for every query.
    #[arg(long)]
    one_shot: bool,
    /// Write every script sent to the solver into this directory.
    #[arg(long, value_name = "DIR")]
    dump_smt: Option<PathBuf>,
    /// Search for countermodels within these bounds and compare verdicts.
    #[arg(long, num_args = 2, value_names = ["STORE_BOUND", "VALUE_BOUND"])]
    oracle: Option<Vec<u64>>,
    /// Generate and check a benchmark family.
    #[arg(long, num_args = 3, value_names = ["FAMILY", "COUNT", "SEED"])]
    bench: Option<Vec<String>>,
    /// Print the generated benchmark instead of checking it.
    #[arg(long, requires = "bench")]
    emit: bool,
    /// Translation nodes allowed per sorted entailment.
    #[arg(long, default_value_t = 200_000)]
    node_budget: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug)]
enum Input {
    Single(String),
    File(InputFile),
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("slar: {}", msg);
    ExitCode::from(EXIT_USAGE)
}

fn bench_spec(args: &[String]) -> Result<BenchSpec, String> {
    let family: Family = args[0].parse().map_err(|e| format!("{}", e))?;
    let count = args[1].parse().map_err(|_| format!("invalid count `{}`", args[1]))?;
    let seed = args[2].parse().map_err(|_| format!("invalid seed `{}`", args[2]))?;
    Ok(BenchSpec::new(family, count, seed))
}

fn read_input(cli: &Cli) -> Result<Input, String> {
    if let Some(text) = &cli.entailment {
        return Ok(Input::Single(text.clone()));
    }
    if let Some(args) = &cli.bench {
        return Ok(Input::File(generate_bench(&bench_spec(args)?)));
    }
    let text = match cli.file.as_deref() {
        None => return Err("expected FILE, --entailment or --bench".into()),
        Some(p) if p.as_os_str() == "-" => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(|e| e.to_string())?;
            s
        }
        Some(p) => fs::read_to_string(p).map_err(|e| format!("{}: {}", p.display(), e))?,
    };
    parse_file(&text).map(Input::File).map_err(|e| e.to_string())
}

fn solver_config(cli: &Cli) -> SolverConfig {
    let mut cfg = match &cli.solver {
        Some(p) => SolverConfig::new(p),
        None => SolverConfig::from_env(),
    };
    if !cli.solver_args.is_empty() {
        cfg.args = cli.solver_args.clone();
    }
    cfg.timeout_ms = cli.timeout_ms;
    cfg.dump_dir = cli.dump_smt.clone();
    cfg.persistent = !cli.one_shot;
    cfg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let input = match read_input(&cli) {
        Ok(i) => i,
        Err(e) => return usage(e),
    };
    if cli.emit {
        if let Input::File(f) = &input {
            print!("{}", f);
        }
        return ExitCode::SUCCESS;
    }
    let oracle = cli.oracle.as_ref().map(|v| (v[0], v[1]));
    let run = RunOptions {
        enable_u: !cli.no_u,
        enable_f: !cli.no_f,
        enable_simplify: cli.simplify,
        oracle_bounds: oracle,
        node_budget: Some(cli.node_budget),
    };
    let mut backend = match SolverBackend::new(solver_config(&cli)) {
        Ok(b) => b,
        Err(e) => return usage(e),
    };
    let limit = cli.entailment_timeout_ms.map(Duration::from_millis);
    match input {
        Input::Single(text) => {
            let e = match parse_entailment(&text) {
                Ok(e) => e,
                Err(err) => return usage(err),
            };
            let start = Instant::now();
            backend.set_deadline(limit.map(|t| start + t));
            let outcome = decide(&e, &run, &mut backend);
            let secs = start.elapsed().as_secs_f64();
            match cli.format {
                Format::Text => {
                    println!("{}", outcome.verdict);
                    if let Verdict::Invalid(w) = &outcome.verdict {
                        println!("failing sorted entailment: #{}", w.sorted_index);
                        if let Some(cm) = &w.countermodel {
                            println!("countermodel: {}", cm);
                        }
                    }
                    let s = outcome.stats;
                    println!(
                        "time={:.3}s perms={} pruned={} frames={} calls={}",
                        secs, s.permutations, s.pruned, s.frames_removed, s.solver_calls
                    );
                }
                Format::Json => {
                    let countermodel = match &outcome.verdict {
                        Verdict::Invalid(w) => w.countermodel.as_ref().map(|c| c.to_string()),
                        _ => None,
                    };
                    let s = outcome.stats;
                    let value = serde_json::json!({
                        "verdict": outcome.verdict.label(),
                        "detail": outcome.verdict.to_string(),
                        "countermodel": countermodel,
                        "seconds": secs,
                        "permutations": s.permutations,
                        "pruned": s.pruned,
                        "frames_removed": s.frames_removed,
                        "solver_calls": s.solver_calls,
                    });
                    println!("{}", value);
                }
            }
            ExitCode::from(match outcome.verdict {
                Verdict::Valid => EXIT_VALID,
                Verdict::Invalid(_) => EXIT_INVALID,
                Verdict::ConditionViolation(_) => EXIT_CONDITION,
                Verdict::Unknown(_) => EXIT_UNKNOWN,
            })
        }
        Input::File(file) => {
            let opts = BatchOptions {
                run,
                entailment_timeout: limit,
                cross_check: oracle,
            };
            let report = run_batch(&file, &opts, &mut backend as &mut dyn DeadlineBackend);
            match cli.format {
                Format::Text => print!("{}", report),
                Format::Json => println!("{}", report.to_json()),
            }
            ExitCode::SUCCESS
        }
    }
}
