//! Seeded synthetic benchmark families.
//!
//! Base instances lay out one or two runs of consecutive cells, cover them
//! with points-to and array atoms on the left, and cover them again with a
//! different chunking on the right. Invalid instances perturb a value or the
//! footprint of one right-hand atom. The other families extend Base.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slar_core::syntax::{Entailment, PureFormula, Sigma, SpatialAtom, SymbolicHeap, Term, Var};

use crate::parser::InputFile;

/// Largest numeral a Base instance mentions.
pub const MAX_CONSTANT: u64 = 5;
/// Cells per instance, leaving room to grow any run by one cell.
const MAX_CELLS: u64 = MAX_CONSTANT - 1;
const VARS: [&str; 3] = ["x", "y", "z"];
const FRAME_VAR: &str = "w";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Base,
    SingleFrame(usize),
    SingleNFrame(usize),
    Multi,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Base => f.write_str("base"),
            Family::SingleFrame(n) => write!(f, "single-frame-{}", n),
            Family::SingleNFrame(n) => write!(f, "single-nframe-{}", n),
            Family::Multi => f.write_str("multi"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown benchmark family `{0}` (expected base, multi, single-frame-N or single-nframe-N with N in 2..=3)")]
pub struct FamilyError(String);

impl FromStr for Family {
    type Err = FamilyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        let sized = |prefix: &str| -> Option<usize> {
            let n: usize = key.strip_prefix(prefix)?.parse().ok()?;
            (2..=3).contains(&n).then_some(n)
        };
        match key.as_str() {
            "base" => Ok(Family::Base),
            "multi" => Ok(Family::Multi),
            _ => sized("singlenframe")
                .map(Family::SingleNFrame)
                .or_else(|| sized("singleframe").map(Family::SingleFrame))
                .ok_or_else(|| FamilyError(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Pto,
    Array,
    Mix,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Pto => "pto",
            Group::Array => "array",
            Group::Mix => "mix",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSpec {
    pub family: Family,
    pub count: usize,
    pub seed: u64,
    /// Fraction of instances built valid.
    pub valid_ratio: f64,
}

impl BenchSpec {
    pub fn new(family: Family, count: usize, seed: u64) -> Self {
        BenchSpec {
            family,
            count,
            seed,
            valid_ratio: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchEntry {
    pub name: String,
    pub group: Group,
    /// Whether the underlying Base instance was built valid.
    pub intended_valid: bool,
    pub entailment: Entailment,
}

/// The generated instances with their construction metadata.
pub fn generate_entries(spec: &BenchSpec) -> Vec<BenchEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.count)
        .map(|i| {
            let group = match i * 3 / spec.count.max(1) {
                0 => Group::Pto,
                1 => Group::Array,
                _ => Group::Mix,
            };
            let valid = rng.gen_bool(spec.valid_ratio.clamp(0.0, 1.0));
            let mut inst = base_instance(&mut rng, group, valid);
            match spec.family {
                Family::Base => {}
                Family::SingleFrame(n) => {
                    let frame = frame_atoms(&mut rng, n);
                    inst.antecedent.spatial.atoms.extend(frame.iter().cloned());
                    inst.succedents[0].spatial.atoms.extend(frame);
                }
                Family::SingleNFrame(n) => {
                    let w = Term::var(FRAME_VAR);
                    let cells = (0..n as u64).map(|k| w.offset(k));
                    inst.antecedent
                        .spatial
                        .atoms
                        .extend(cells.clone().map(|a| SpatialAtom::PointsTo(a, Term::constant(rng.gen_range(0..=MAX_CONSTANT)))));
                    inst.succedents[0].spatial.atoms.extend(cells.map(|a| SpatialAtom::Arr(a.clone(), a)));
                }
                Family::Multi => {
                    let extra = rng.gen_range(1..=2);
                    for _ in 0..extra {
                        inst.succedents.push(inst.mismatched(&mut rng));
                    }
                }
            }
            BenchEntry {
                name: format!("{}-{}-{:03}-{}", spec.family, group, i, if valid { "valid" } else { "invalid" }),
                group,
                intended_valid: valid,
                entailment: inst.into_entailment(),
            }
        })
        .collect()
}

/// The generated instances as a named entailment file.
pub fn generate_bench(spec: &BenchSpec) -> InputFile {
    InputFile {
        entries: generate_entries(spec).into_iter().map(|e| (e.name, e.entailment)).collect(),
    }
}

fn frame_atoms(rng: &mut ChaCha8Rng, n: usize) -> Vec<SpatialAtom> {
    let w = Term::var(FRAME_VAR);
    let mut cursor = 0;
    let mut out = Vec::new();
    for k in 0..n as u64 {
        if rng.gen_bool(0.5) {
            out.push(SpatialAtom::PointsTo(w.offset(cursor), Term::constant(k)));
            cursor += 1;
        } else {
            out.push(SpatialAtom::Arr(w.offset(cursor), w.offset(cursor + 1)));
            cursor += 2;
        }
    }
    out
}

/// A run of consecutive cells starting at `base + start`.
#[derive(Clone, Debug)]
struct Run {
    base: Term,
    start: u64,
    /// Value of each cell when a points-to atom stores it.
    values: Vec<Option<Term>>,
}

impl Run {
    fn addr(&self, k: u64) -> Term {
        self.base.offset(self.start + k)
    }
}

/// A right-hand atom over cells `first..=last` of run `run`.
#[derive(Clone, Debug)]
struct Chunk {
    run: usize,
    first: u64,
    last: u64,
    kind: ChunkKind,
}

#[derive(Clone, Debug)]
enum ChunkKind {
    Arr,
    Value(Term),
    /// Points-to whose value is a fresh existential, optionally pinned.
    Bound(Option<Term>),
}

struct Instance {
    runs: Vec<Run>,
    antecedent: SymbolicHeap,
    chunks: Vec<Chunk>,
    succedents: Vec<SymbolicHeap>,
}

impl Instance {
    fn into_entailment(self) -> Entailment {
        Entailment::new(self.antecedent, self.succedents)
    }

    /// A succedent covering a different number of cells than the antecedent,
    /// derived from the valid chunking.
    fn mismatched(&self, rng: &mut ChaCha8Rng) -> SymbolicHeap {
        let mut chunks = self.chunks.clone();
        let mut options: Vec<usize> = Vec::new();
        for (i, c) in chunks.iter().enumerate() {
            if matches!(c.kind, ChunkKind::Arr) {
                if c.last > c.first {
                    options.push(2 * i);
                }
                if self.fits(c.run, c.last + 1) {
                    options.push(2 * i + 1);
                }
            }
        }
        if chunks.len() > 1 {
            options.push(usize::MAX);
        }
        match options.choose(rng).copied() {
            Some(usize::MAX) => {
                chunks.remove(rng.gen_range(0..chunks.len()));
            }
            Some(o) if o % 2 == 0 => chunks[o / 2].first += 1,
            Some(o) => chunks[o / 2].last += 1,
            None => {
                let run = &self.runs[chunks[0].run];
                let next = run.values.len() as u64;
                chunks.push(Chunk {
                    run: chunks[0].run,
                    first: next,
                    last: next,
                    kind: ChunkKind::Value(Term::zero()),
                });
            }
        }
        render(&self.runs, &chunks)
    }

    fn fits(&self, run: usize, cell: u64) -> bool {
        let r = &self.runs[run];
        r.base.constant_part() + r.start + cell <= MAX_CONSTANT
    }
}

fn random_value(rng: &mut ChaCha8Rng, vars: &[&str]) -> Term {
    if rng.gen_bool(0.6) {
        Term::constant(rng.gen_range(0..=MAX_CONSTANT))
    } else {
        Term::var(*vars.choose(rng).expect("vars"))
    }
}

fn base_instance(rng: &mut ChaCha8Rng, group: Group, valid: bool) -> Instance {
    let nvars = rng.gen_range(1..=VARS.len());
    let vars = &VARS[..nvars];
    let atom_count = rng.gen_range(2..=3);

    // Antecedent atom lengths, then a layout of runs holding them.
    let mut kinds: Vec<bool> = (0..atom_count)
        .map(|_| match group {
            Group::Pto => true,
            Group::Array => false,
            Group::Mix => rng.gen_bool(0.5),
        })
        .collect();
    if group == Group::Mix && kinds.iter().all(|&k| k == kinds[0]) {
        kinds[0] = !kinds[0];
    }
    let mut lens: Vec<u64> = kinds.iter().map(|&pto| if pto { 1 } else { rng.gen_range(1..=2) }).collect();
    while lens.iter().sum::<u64>() > MAX_CELLS {
        let i = lens.iter().position(|&l| l > 1).expect("some array has length two");
        lens[i] -= 1;
    }
    let mut groups = vec![(0, atom_count)];
    if rng.gen_bool(0.4) {
        let split = rng.gen_range(1..atom_count);
        let first: u64 = lens[..split].iter().sum();
        let second: u64 = lens[split..].iter().sum();
        if nvars > 1 || first + 1 + second <= MAX_CELLS {
            groups = vec![(0, split), (split, atom_count)];
        }
    }

    let mut runs: Vec<Run> = Vec::new();
    let mut ante_atoms = Vec::new();
    for (ri, &(lo, hi)) in groups.iter().enumerate() {
        let cells: u64 = lens[lo..hi].iter().sum();
        let (base, start) = if ri == 0 {
            if rng.gen_bool(0.3) {
                (Term::constant(rng.gen_range(1..=MAX_CELLS + 1 - cells)), 0)
            } else {
                (Term::var(vars[0]), 0)
            }
        } else {
            let prev = &runs[0];
            let gap_start = prev.start + prev.values.len() as u64 + 1;
            let same_var = !prev.base.is_ground() && gap_start + cells <= MAX_CELLS;
            if nvars > 1 && (!same_var || rng.gen_bool(0.5)) {
                (Term::var(vars[1]), 0)
            } else if same_var {
                (prev.base.clone(), gap_start)
            } else {
                (Term::var(vars[0]), 0)
            }
        };
        let mut run = Run {
            base,
            start,
            values: Vec::new(),
        };
        for i in lo..hi {
            let at = run.values.len() as u64;
            if kinds[i] {
                let v = random_value(rng, vars);
                ante_atoms.push(SpatialAtom::PointsTo(run.addr(at), v.clone()));
                run.values.push(Some(v));
            } else {
                ante_atoms.push(SpatialAtom::Arr(run.addr(at), run.addr(at + lens[i] - 1)));
                run.values.extend((0..lens[i]).map(|_| None));
            }
        }
        runs.push(run);
    }
    let mut pure = PureFormula::True;
    if nvars >= 2 && rng.gen_bool(0.3) {
        let (a, b) = (vars[0], vars[1]);
        pure = PureFormula::conj(vec![if rng.gen_bool(0.5) { PureFormula::lt(a, b) } else { PureFormula::neq(a, b) }]);
    }
    let antecedent = SymbolicHeap::new(pure, Sigma::new(ante_atoms));

    let valid_chunks = chunking(rng, group, &runs);
    let mut chunks = valid_chunks.clone();
    if !valid {
        perturb(rng, group, &runs, &mut chunks);
    }
    chunks.shuffle(rng);
    let succedent = render(&runs, &chunks);
    Instance {
        runs,
        antecedent,
        chunks: valid_chunks,
        succedents: vec![succedent],
    }
}

/// Splits every run into at most three chunks in total, each a valid cover.
fn chunking(rng: &mut ChaCha8Rng, group: Group, runs: &[Run]) -> Vec<Chunk> {
    let mut out = Vec::new();
    let mut budget = 3 - runs.len() as u64 + 1;
    for (ri, run) in runs.iter().enumerate() {
        let n = run.values.len() as u64;
        let max_pieces = if group == Group::Pto { n } else { n.min(budget) };
        let pieces = if group == Group::Pto { n } else { rng.gen_range(1..=max_pieces) };
        budget = budget + 1 - pieces;
        let mut cuts: Vec<u64> = (1..n).collect();
        cuts.shuffle(rng);
        cuts.truncate(pieces as usize - 1);
        cuts.sort_unstable();
        let mut first = 0;
        for end in cuts.into_iter().chain(std::iter::once(n)) {
            let last = end - 1;
            let kind = if first == last && group != Group::Array && (group == Group::Pto || rng.gen_bool(0.6)) {
                match &run.values[first as usize] {
                    Some(v) if rng.gen_bool(0.7) => ChunkKind::Value(v.clone()),
                    Some(v) => ChunkKind::Bound(Some(v.clone())),
                    None => ChunkKind::Bound(None),
                }
            } else {
                ChunkKind::Arr
            };
            out.push(Chunk { run: ri, first, last, kind });
            first = end;
        }
    }
    out
}

fn perturb(rng: &mut ChaCha8Rng, group: Group, runs: &[Run], chunks: &mut Vec<Chunk>) {
    #[derive(Clone, Copy)]
    enum P {
        Value(usize),
        Pin(usize),
        Shrink(usize),
        Grow(usize),
        Drop(usize),
    }
    let fits = |c: &Chunk, cell: u64| runs[c.run].base.constant_part() + runs[c.run].start + cell <= MAX_CONSTANT;
    let mut options = Vec::new();
    for (i, c) in chunks.iter().enumerate() {
        match &c.kind {
            ChunkKind::Value(_) | ChunkKind::Bound(Some(_)) => options.push(P::Value(i)),
            ChunkKind::Bound(None) => options.push(P::Pin(i)),
            ChunkKind::Arr => {
                if c.last > c.first {
                    options.push(P::Shrink(i));
                }
                if fits(c, c.last + 1) {
                    options.push(P::Grow(i));
                }
            }
        }
        if chunks.len() > 1 && group != Group::Pto {
            options.push(P::Drop(i));
        }
    }
    let bump = |v: &Term| if v.is_ground() && v.constant_part() == MAX_CONSTANT { Term::constant(MAX_CONSTANT - 1) } else { v.offset(1) };
    match *options.choose(rng).expect("some perturbation applies") {
        P::Value(i) => {
            chunks[i].kind = match &chunks[i].kind {
                ChunkKind::Value(v) => ChunkKind::Value(bump(v)),
                ChunkKind::Bound(Some(v)) => ChunkKind::Bound(Some(bump(v))),
                k => k.clone(),
            }
        }
        P::Pin(i) => chunks[i].kind = ChunkKind::Value(Term::constant(rng.gen_range(0..=MAX_CONSTANT))),
        P::Shrink(i) => chunks[i].first += 1,
        P::Grow(i) => chunks[i].last += 1,
        P::Drop(i) => {
            chunks.remove(i);
        }
    }
}

fn render(runs: &[Run], chunks: &[Chunk]) -> SymbolicHeap {
    let mut atoms = Vec::new();
    let mut pure = Vec::new();
    let mut ex_vars = Vec::new();
    for c in chunks {
        let (lo, hi) = chunk_bounds(runs, c);
        match &c.kind {
            ChunkKind::Arr => atoms.push(SpatialAtom::Arr(lo, hi)),
            ChunkKind::Value(v) => atoms.push(SpatialAtom::PointsTo(lo, v.clone())),
            ChunkKind::Bound(pin) => {
                let y = Var::new(&format!("u{}", ex_vars.len()));
                if let Some(v) = pin {
                    pure.push(PureFormula::eq(Term::var(y.clone()), v.clone()));
                }
                atoms.push(SpatialAtom::PointsTo(lo, Term::var(y.clone())));
                ex_vars.push(y);
            }
        }
    }
    let pure = if pure.is_empty() { PureFormula::True } else { PureFormula::conj(pure) };
    SymbolicHeap::new(pure, Sigma::new(atoms)).with_ex_vars(ex_vars)
}

fn chunk_bounds(runs: &[Run], c: &Chunk) -> (Term, Term) {
    let run = &runs[c.run];
    (run.addr(c.first), run.addr(c.last))
}
