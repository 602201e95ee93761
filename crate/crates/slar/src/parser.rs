//! Concrete syntax for entailments and entailment files.
//!
//! ```text
//! entailment := heap "|-" heap ("," heap)*
//! heap       := ["Ex" var+ "."] [pure "&"] spatial
//! pure       := cmp ("&" cmp)*
//! cmp        := term ("=" | "!=" | "<" | "<=" | ">" | ">=") term
//! spatial    := atom ("*" atom)*
//! atom       := "emp" | term "->" term | "Arr(" term "," term ")"
//! term       := factor ("+" factor)*
//! factor     := var | natural
//! ```

use std::collections::BTreeSet;
use std::fmt;

use slar_core::syntax::{Entailment, FreeVars, PureFormula, Rel, Sigma, SpatialAtom, Substitute, SymbolicHeap, Term, Var};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("{0}")]
    Semantic(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(u64),
    Turnstile,
    PointsTo,
    Comma,
    Dot,
    Amp,
    Star,
    Plus,
    LParen,
    RParen,
    Cmp(Cmp),
    End,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cmp {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{}`", s),
            Tok::Nat(n) => write!(f, "`{}`", n),
            Tok::Turnstile => f.write_str("`|-`"),
            Tok::PointsTo => f.write_str("`->`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Cmp(_) => f.write_str("comparison"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "_'$~".contains(c)
}

fn tokenize(src: &str, line: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let err = |col: usize, msg: String| ParseError {
        line,
        column: col + 1,
        kind: ErrorKind::Syntax(msg),
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let next = chars.get(i + 1).copied();
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            c if is_ident_start(c) => {
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), start));
                continue;
            }
            c if c.is_ascii_digit() => {
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let n = text.parse().map_err(|_| err(start, format!("numeral out of range: {}", text)))?;
                out.push((Tok::Nat(n), start));
                continue;
            }
            '|' if next == Some('-') => Tok::Turnstile,
            '-' if next == Some('>') => Tok::PointsTo,
            '!' if next == Some('=') => Tok::Cmp(Cmp::Neq),
            '<' if next == Some('=') => Tok::Cmp(Cmp::Le),
            '>' if next == Some('=') => Tok::Cmp(Cmp::Ge),
            '<' => Tok::Cmp(Cmp::Lt),
            '>' => Tok::Cmp(Cmp::Gt),
            '=' => Tok::Cmp(Cmp::Eq),
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '&' => Tok::Amp,
            '*' => Tok::Star,
            '+' => Tok::Plus,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c => return Err(err(start, format!("unexpected character `{}`", c))),
        };
        i += match tok {
            Tok::Turnstile | Tok::PointsTo | Tok::Cmp(Cmp::Neq | Cmp::Le | Cmp::Ge) => 2,
            _ => 1,
        };
        out.push((tok, start));
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    column_offset: usize,
}

enum Item {
    Pure(PureFormula),
    Spatial(SpatialAtom),
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.column_offset + self.toks[self.pos].1 + 1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn error(&self, kind: ErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column(),
            kind,
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        self.error(ErrorKind::Syntax(format!("expected {}, found {}", wanted, self.peek())))
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn entailment(&mut self) -> Result<Entailment, ParseError> {
        let ante_col = self.column();
        let antecedent = self.heap()?;
        if !antecedent.ex_vars.is_empty() {
            return Err(ParseError {
                line: self.line,
                column: ante_col,
                kind: ErrorKind::Semantic("the antecedent must not bind variables".into()),
            });
        }
        self.expect(Tok::Turnstile, "`|-`")?;
        let mut succedents = vec![self.heap()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            succedents.push(self.heap()?);
        }
        if *self.peek() != Tok::End {
            return Err(self.unexpected("`,` or end of input"));
        }
        Ok(Entailment::new(antecedent, succedents))
    }

    fn heap(&mut self) -> Result<SymbolicHeap, ParseError> {
        let mut ex_vars: Vec<Var> = Vec::new();
        if self.is_keyword("Ex") {
            self.bump();
            while let Tok::Ident(name) = self.peek().clone() {
                let v = self.var(&name)?;
                if ex_vars.contains(&v) {
                    return Err(self.error(ErrorKind::Semantic(format!("variable `{}` is bound twice", name))));
                }
                self.bump();
                ex_vars.push(v);
            }
            if ex_vars.is_empty() {
                return Err(self.unexpected("a variable"));
            }
            self.expect(Tok::Dot, "`.` or a variable")?;
        }
        let mut pure = Vec::new();
        let first_spatial = loop {
            match self.item()? {
                Item::Pure(p) => {
                    pure.push(p);
                    self.expect(Tok::Amp, "`&`")?;
                }
                Item::Spatial(a) => break a,
            }
        };
        let mut atoms = vec![first_spatial];
        while *self.peek() == Tok::Star {
            self.bump();
            match self.item()? {
                Item::Spatial(a) => atoms.push(a),
                Item::Pure(_) => return Err(self.error(ErrorKind::Syntax("comparison inside a spatial formula".into()))),
            }
        }
        let atoms = if atoms.iter().all(SpatialAtom::is_emp) { Vec::new() } else { atoms };
        let pure = if pure.is_empty() { PureFormula::True } else { PureFormula::conj(pure) };
        Ok(SymbolicHeap::new(pure, Sigma::new(atoms)).with_ex_vars(ex_vars))
    }

    fn item(&mut self) -> Result<Item, ParseError> {
        if self.is_keyword("emp") {
            self.bump();
            return Ok(Item::Spatial(SpatialAtom::Emp));
        }
        if self.is_keyword("Arr") {
            self.bump();
            self.expect(Tok::LParen, "`(`")?;
            let lo = self.term()?;
            self.expect(Tok::Comma, "`,`")?;
            let hi = self.term()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Item::Spatial(SpatialAtom::Arr(lo, hi)));
        }
        let lhs = self.term()?;
        match self.bump() {
            Tok::PointsTo => Ok(Item::Spatial(SpatialAtom::PointsTo(lhs, self.term()?))),
            Tok::Cmp(c) => {
                let rhs = self.term()?;
                Ok(Item::Pure(match c {
                    Cmp::Eq => PureFormula::atom(Rel::Eq, lhs, rhs),
                    Cmp::Neq => PureFormula::atom(Rel::Neq, lhs, rhs),
                    Cmp::Lt => PureFormula::atom(Rel::Lt, lhs, rhs),
                    Cmp::Le => PureFormula::atom(Rel::Le, lhs, rhs),
                    Cmp::Gt => PureFormula::atom(Rel::Lt, rhs, lhs),
                    Cmp::Ge => PureFormula::atom(Rel::Le, rhs, lhs),
                }))
            }
            _ => {
                self.pos -= 1;
                Err(self.unexpected("`->` or a comparison"))
            }
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let mut t = self.factor()?;
        while *self.peek() == Tok::Plus {
            self.bump();
            t = t + self.factor()?;
        }
        Ok(t)
    }

    fn factor(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Nat(n) => {
                self.bump();
                Ok(Term::constant(n))
            }
            Tok::Ident(name) => {
                let v = self.var(&name)?;
                self.bump();
                Ok(Term::var(v))
            }
            _ => Err(self.unexpected("a variable or numeral")),
        }
    }

    fn var(&self, name: &str) -> Result<Var, ParseError> {
        if matches!(name, "Ex" | "emp" | "Arr") {
            return Err(self.error(ErrorKind::Syntax(format!("`{}` is reserved", name))));
        }
        Ok(Var::new(name))
    }
}

/// Parses one entailment. Succedent binders are renamed apart from every
/// other variable of the entailment.
pub fn parse_entailment(text: &str) -> Result<Entailment, ParseError> {
    parse_at(text, 1, 0)
}

fn parse_at(text: &str, line: usize, column_offset: usize) -> Result<Entailment, ParseError> {
    let toks = tokenize(text, line).map_err(|mut e| {
        e.column += column_offset;
        e
    })?;
    let mut p = Parser {
        toks,
        pos: 0,
        line,
        column_offset,
    };
    Ok(rename_binders(p.entailment()?))
}

fn rename_binders(mut e: Entailment) -> Entailment {
    let mut used: BTreeSet<Var> = e.free_vars();
    let mut k = 0usize;
    for s in e.succedents.iter_mut() {
        let mut bindings = std::collections::BTreeMap::new();
        for y in s.ex_vars.iter_mut() {
            let fresh = loop {
                let cand = Var::new(&format!("v${}", k));
                k += 1;
                if !used.contains(&cand) {
                    break cand;
                }
            };
            used.insert(fresh.clone());
            bindings.insert(y.clone(), Term::var(fresh.clone()));
            *y = fresh;
        }
        s.pure = s.pure.substitute(&bindings);
        s.spatial = s.spatial.substitute(&bindings);
    }
    e
}

/// Named entailments in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InputFile {
    pub entries: Vec<(String, Entailment)>,
}

impl InputFile {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl fmt::Display for InputFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, e) in &self.entries {
            writeln!(f, "{}: {}", name, e)?;
        }
        Ok(())
    }
}

/// Parses a file of `name: entailment` lines. `#` starts a comment; a line
/// without a name is called `e<line number>`.
pub fn parse_file(text: &str) -> Result<InputFile, ParseError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let (name, body, offset) = match split_name(content) {
            Some((name, rest)) => (name.to_string(), rest, content.len() - rest.len()),
            None => (format!("e{}", line), content, 0),
        };
        entries.push((name, parse_at(body, line, offset)?));
    }
    Ok(InputFile { entries })
}

fn split_name(content: &str) -> Option<(&str, &str)> {
    let (name, rest) = content.split_once(':')?;
    let name = name.trim();
    let mut chars = name.chars();
    let ok = chars.next().map_or(false, |c| c.is_ascii_alphanumeric() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c));
    ok.then_some((name, rest))
}
