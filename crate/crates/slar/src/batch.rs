//! Running many entailments and reporting on them.

use std::fmt;
use std::time::{Duration, Instant};

use serde::Serialize;

use slar_core::backend::{Backend, BoundedBackend, UnknownReason};
use slar_core::pipeline::{decide, RunOptions, Stats, Verdict};
use slar_core::semantics::oracle_search;

use crate::parser::InputFile;
use crate::solver::SolverBackend;

/// A backend that can be told when to give up on the current entailment.
pub trait DeadlineBackend: Backend {
    fn set_deadline(&mut self, deadline: Option<Instant>);
}

impl DeadlineBackend for SolverBackend {
    fn set_deadline(&mut self, deadline: Option<Instant>) {
        SolverBackend::set_deadline(self, deadline)
    }
}

impl DeadlineBackend for BoundedBackend {
    fn set_deadline(&mut self, _: Option<Instant>) {}
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchOptions {
    pub run: RunOptions,
    /// Wall-clock limit per entailment.
    pub entailment_timeout: Option<Duration>,
    /// Also search for a countermodel within these bounds and compare.
    pub cross_check: Option<(u64, u64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Bucket {
    #[serde(rename = "<0.1s")]
    UnderTenth,
    #[serde(rename = "<1s")]
    UnderOne,
    #[serde(rename = "<10s")]
    UnderTen,
    #[serde(rename = "<300s")]
    UnderThreeHundred,
    #[serde(rename = "timeout")]
    Timeout,
}

impl Bucket {
    pub const ALL: [Bucket; 5] =
        [Bucket::UnderTenth, Bucket::UnderOne, Bucket::UnderTen, Bucket::UnderThreeHundred, Bucket::Timeout];

    pub fn of(elapsed: Duration, verdict: &Verdict) -> Bucket {
        let secs = elapsed.as_secs_f64();
        match verdict {
            Verdict::Unknown(UnknownReason::Timeout) => Bucket::Timeout,
            _ if secs < 0.1 => Bucket::UnderTenth,
            _ if secs < 1.0 => Bucket::UnderOne,
            _ if secs < 10.0 => Bucket::UnderTen,
            _ if secs < 300.0 => Bucket::UnderThreeHundred,
            _ => Bucket::Timeout,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Bucket::UnderTenth => "<0.1s",
            Bucket::UnderOne => "<1s",
            Bucket::UnderTen => "<10s",
            Bucket::UnderThreeHundred => "<300s",
            Bucket::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub permutations: usize,
    pub pruned: usize,
    pub frames_removed: usize,
    pub solver_calls: usize,
    pub translation_nodes: usize,
}

impl From<Stats> for Counts {
    fn from(s: Stats) -> Self {
        Counts {
            permutations: s.permutations,
            pruned: s.pruned,
            frames_removed: s.frames_removed,
            solver_calls: s.solver_calls,
            translation_nodes: s.translation_nodes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportLine {
    pub name: String,
    pub verdict: String,
    pub detail: Option<String>,
    pub seconds: f64,
    pub bucket: Bucket,
    pub counts: Counts,
    /// Whether the bounded oracle agrees, when cross-checking.
    pub oracle_agrees: Option<bool>,
    #[serde(skip)]
    pub outcome: Verdict,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Report {
    pub lines: Vec<ReportLine>,
}

impl Report {
    pub fn histogram(&self) -> Vec<(Bucket, usize)> {
        Bucket::ALL.iter().map(|&b| (b, self.lines.iter().filter(|l| l.bucket == b).count())).collect()
    }

    pub fn total_seconds(&self) -> f64 {
        self.lines.iter().map(|l| l.seconds).sum()
    }

    pub fn disagreements(&self) -> usize {
        self.lines.iter().filter(|l| l.oracle_agrees == Some(false)).count()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            lines: &'a [ReportLine],
            histogram: Vec<(&'static str, usize)>,
            total_seconds: f64,
        }
        let summary = Summary {
            lines: &self.lines,
            histogram: self.histogram().into_iter().map(|(b, n)| (b.label(), n)).collect(),
            total_seconds: self.total_seconds(),
        };
        serde_json::to_string_pretty(&summary).expect("report serializes")
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            let c = &l.counts;
            write!(
                f,
                "{}\t{}\t{:.3}s\tperms={} pruned={} frames={} calls={}",
                l.name, l.verdict, l.seconds, c.permutations, c.pruned, c.frames_removed, c.solver_calls
            )?;
            match l.oracle_agrees {
                Some(true) => f.write_str("\toracle=agree")?,
                Some(false) => f.write_str("\toracle=DISAGREE")?,
                None => {}
            }
            if let Some(d) = &l.detail {
                write!(f, "\t{}", d)?;
            }
            writeln!(f)?;
        }
        let hist: Vec<String> = self.histogram().into_iter().map(|(b, n)| format!("{} {}", b.label(), n)).collect();
        writeln!(f, "# {} entailments, {:.3}s total; {}", self.lines.len(), self.total_seconds(), hist.join(", "))
    }
}

fn detail(v: &Verdict) -> Option<String> {
    match v {
        Verdict::Valid => None,
        Verdict::Invalid(w) => Some(match &w.countermodel {
            Some(cm) => format!("sorted #{}; {}", w.sorted_index, cm),
            None => format!("sorted #{}", w.sorted_index),
        }),
        Verdict::ConditionViolation(r) => Some(r.to_string()),
        Verdict::Unknown(r) => Some(r.to_string()),
    }
}

/// Decides every entry in order. Each entailment gets a fresh deadline.
pub fn run_batch(file: &InputFile, opts: &BatchOptions, backend: &mut dyn DeadlineBackend) -> Report {
    let mut lines = Vec::with_capacity(file.len());
    for (name, e) in &file.entries {
        let start = Instant::now();
        backend.set_deadline(opts.entailment_timeout.map(|t| start + t));
        let outcome = decide(e, &opts.run, &mut *backend);
        let elapsed = start.elapsed();
        backend.set_deadline(None);
        let oracle_agrees = opts.cross_check.map(|(sb, vb)| {
            !(outcome.verdict.is_valid() && oracle_search(e, sb, vb).is_some())
        });
        lines.push(ReportLine {
            name: name.clone(),
            verdict: outcome.verdict.label().to_string(),
            detail: detail(&outcome.verdict),
            seconds: elapsed.as_secs_f64(),
            bucket: Bucket::of(elapsed, &outcome.verdict),
            counts: outcome.stats.into(),
            oracle_agrees,
            outcome: outcome.verdict,
        });
    }
    Report { lines }
}

/// Median of `xs`, or zero when empty.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
