//! The `.qwp` protocol language.
//!
//! A file is a `qwp 1` header followed by one statement per line; `#` starts
//! a comment.
//!
//! ```text
//! qwp 1
//! system S:2
//! system A:2
//! basis z on S = [up: 1, 0; down: 0, 1]
//! basis x on S = [right: 1/sqrt2, 1/sqrt2; left: 1/sqrt2, -1/sqrt2]
//! basis rec_A on A = [U: 1, 0; D: 0, 1]
//! prepare S right
//! measure S in z record A
//! report S A in z rec_A
//! ```
//!
//! * `system <name>:<dim>` declares a subsystem; declaration order is tensor
//!   order.
//! * `basis <name> on <system> = [<label>: c, c, …; …]` lists orthonormal
//!   rows. A component is a real number or `(re, im)`; numbers are decimal
//!   literals or `1/sqrt2`, `1/sqrt8` with an optional sign.
//! * `prepare <system> <label>` picks the vector with that label from the
//!   first basis on the system that has it; `prepare <system> [c, …]` gives
//!   the vector directly. Preparations precede every other step.
//! * `measure <target> in <basis> record <observer>` and
//!   `catmeasure <agent> in <basis> record <observer>` pre-measure into the
//!   observer's record basis, the first basis declared on it (computational
//!   otherwise), whose first vector is the ready state.
//! * `collapse <target> in <basis>` samples and projects.
//! * `report <names…> in <bases…>` asks for a joint Born table.
//!
//! [`parse`] collects every error with its source span instead of stopping
//! at the first. A statement that fails to declare a name makes later uses of
//! that name silent, so each mistake is reported once.

use std::collections::{HashMap, HashSet};
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;

use crate::scenarios::{Protocol, Step};
use crate::statevec::{c64, norm_of, Basis, SystemLayout, NORM_TOLERANCE};

/// Location of an error: 1-based line and column (in characters) and the
/// length of the offending text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    Lex,
    Syntax,
    Semantic,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Lex => "lex",
            ErrorKind::Syntax => "syntax",
            ErrorKind::Semantic => "semantic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ErrorKind,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {} error: {}",
            self.span.line,
            self.span.column,
            self.kind.as_str(),
            self.message
        )
    }
}

impl std::error::Error for ParseError {}

const KEYWORDS: &[&str] = &[
    "qwp",
    "system",
    "basis",
    "on",
    "prepare",
    "measure",
    "catmeasure",
    "collapse",
    "report",
    "in",
    "record",
];

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Ident(String),
    Number { value: f64, lexeme: String },
    Punct(char),
}

#[derive(Debug, Clone, PartialEq)]
struct Token {
    kind: TokKind,
    span: SourceSpan,
}

fn lex_error(line: usize, column: usize, length: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        span: SourceSpan { line, column, length },
        kind: ErrorKind::Lex,
        message: message.into(),
    }
}

/// Splits one line into tokens; stops at `#`.
fn lex_line(line_no: usize, text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || ((c == '-' || c == '+' || c == '.')
                && chars
                    .get(i + 1)
                    .is_some_and(|n| n.is_ascii_digit() || (c != '.' && *n == '.')));
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokKind::Ident(chars[start..i].iter().collect()),
                span: SourceSpan { line: line_no, column, length: i - start },
            });
        } else if starts_number {
            let start = i;
            if c == '-' || c == '+' {
                i += 1;
            }
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                i += 1;
                if i < chars.len() && (chars[i] == '-' || chars[i] == '+') {
                    i += 1;
                }
                let digits = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if digits == i {
                    return Err(lex_error(line_no, column, i - start, "malformed exponent"));
                }
            }
            let mut lexeme: String = chars[start..i].iter().collect();
            let unsigned = lexeme.trim_start_matches(['-', '+']);
            let value = if chars.get(i) == Some(&'/') {
                if unsigned != "1" {
                    return Err(lex_error(line_no, column, i + 1 - start, "only `1/sqrt2` and `1/sqrt8` may use `/`"));
                }
                let rest: String = chars[i..].iter().take(6).collect();
                let magnitude = match rest.as_str() {
                    "/sqrt2" => FRAC_1_SQRT_2,
                    "/sqrt8" => 0.5 * FRAC_1_SQRT_2,
                    _ => {
                        return Err(lex_error(line_no, column, i + 1 - start, "only `1/sqrt2` and `1/sqrt8` may use `/`"));
                    }
                };
                i += 6;
                if chars.get(i).is_some_and(|n| n.is_alphanumeric() || *n == '_') {
                    return Err(lex_error(line_no, column, i + 1 - start, "only `1/sqrt2` and `1/sqrt8` may use `/`"));
                }
                lexeme.push_str(&rest);
                if lexeme.starts_with('-') {
                    -magnitude
                } else {
                    magnitude
                }
            } else {
                match lexeme.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => return Err(lex_error(line_no, column, i - start, format!("malformed number `{lexeme}`"))),
                }
            };
            if chars.get(i).is_some_and(|n| n.is_alphabetic() || *n == '_') {
                return Err(lex_error(line_no, column, i + 1 - start, format!("malformed number `{lexeme}{}`", chars[i])));
            }
            tokens.push(Token {
                kind: TokKind::Number { value, lexeme },
                span: SourceSpan { line: line_no, column, length: i - start },
            });
        } else if ":,;()[]=".contains(c) {
            tokens.push(Token {
                kind: TokKind::Punct(c),
                span: SourceSpan { line: line_no, column, length: 1 },
            });
            i += 1;
        } else {
            return Err(lex_error(line_no, column, 1, format!("unexpected character `{c}`")));
        }
    }
    Ok(tokens)
}

/// A name together with where it was written.
#[derive(Debug, Clone)]
struct Name {
    text: String,
    span: SourceSpan,
}

#[derive(Debug, Clone)]
enum Vector {
    Label(Name),
    Components(Vec<Complex64>, SourceSpan),
}

#[derive(Debug, Clone)]
enum StepSyntax {
    Prepare { subsystem: Name, vector: Vector },
    Measure { catalytic: bool, target: Name, basis: Name, observer: Name },
    Collapse { target: Name, basis: Name },
    Report { names: Vec<Name>, bases: Vec<Name>, span: SourceSpan },
}

struct BasisSyntax {
    name: Name,
    subsystem: Name,
    rows: Vec<(Name, Vec<Complex64>)>,
    open: SourceSpan,
}

enum Statement {
    Header { version: Token },
    System { name: Name, dim: Token },
    Basis(BasisSyntax),
    Step { step: StepSyntax },
}

struct LineParser {
    tokens: Vec<Token>,
    pos: usize,
    line: usize,
    end_column: usize,
}

impl LineParser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> SourceSpan {
        match self.peek() {
            Some(t) => t.span,
            None => SourceSpan {
                line: self.line,
                column: self.end_column,
                length: 0,
            },
        }
    }

    fn error(&self, expected: &str) -> ParseError {
        let found = match self.peek().map(|t| &t.kind) {
            None => "end of line".to_string(),
            Some(TokKind::Ident(s)) => format!("`{s}`"),
            Some(TokKind::Number { lexeme, .. }) => format!("`{lexeme}`"),
            Some(TokKind::Punct(c)) => format!("`{c}`"),
        };
        ParseError {
            span: self.here(),
            kind: ErrorKind::Syntax,
            message: format!("expected {expected}, found {found}"),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Ident(s), ..
            }) if s == word => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(&format!("`{word}`"))),
        }
    }

    fn name(&mut self, what: &str) -> Result<Name, ParseError> {
        match self.peek().cloned() {
            Some(Token {
                kind: TokKind::Ident(s),
                span,
            }) if !KEYWORDS.contains(&s.as_str()) => {
                self.pos += 1;
                Ok(Name { text: s, span })
            }
            Some(Token {
                kind: TokKind::Ident(s),
                span,
            }) => Err(ParseError {
                span,
                kind: ErrorKind::Syntax,
                message: format!("keyword `{s}` cannot be used as a {what}"),
            }),
            _ => Err(self.error(what)),
        }
    }

    /// A basis label: an identifier or an unsigned integer.
    fn label(&mut self) -> Result<Name, ParseError> {
        match self.peek().cloned() {
            Some(Token {
                kind: TokKind::Number { lexeme, .. },
                span,
            }) if lexeme.chars().all(|c| c.is_ascii_digit()) => {
                self.pos += 1;
                Ok(Name { text: lexeme, span })
            }
            _ => self.name("label"),
        }
    }

    fn punct(&mut self, c: char) -> Result<SourceSpan, ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Punct(p),
                span,
            }) if *p == c => {
                let span = *span;
                self.pos += 1;
                Ok(span)
            }
            _ => Err(self.error(&format!("`{c}`"))),
        }
    }

    fn at_punct(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { kind: TokKind::Punct(p), .. }) if *p == c)
    }

    fn at_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: TokKind::Ident(s), .. }) if s == word)
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Number { value, .. },
                ..
            }) => {
                let v = *value;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error("a number")),
        }
    }

    fn integer(&mut self) -> Result<Token, ParseError> {
        match self.peek() {
            Some(t @ Token {
                kind: TokKind::Number { lexeme, .. },
                ..
            }) if lexeme.chars().all(|c| c.is_ascii_digit()) => {
                let t = t.clone();
                self.pos += 1;
                Ok(t)
            }
            _ => Err(self.error("an integer")),
        }
    }

    fn complex(&mut self) -> Result<Complex64, ParseError> {
        if self.at_punct('(') {
            self.pos += 1;
            let re = self.number()?;
            self.punct(',')?;
            let im = self.number()?;
            self.punct(')')?;
            Ok(c64(re, im))
        } else {
            Ok(c64(self.number()?, 0.0))
        }
    }

    /// `c, c, …` up to (not including) a terminator.
    fn components(&mut self, terminators: &[char]) -> Result<Vec<Complex64>, ParseError> {
        let mut out = vec![self.complex()?];
        while self.at_punct(',') {
            self.pos += 1;
            out.push(self.complex()?);
        }
        if !terminators.iter().any(|&t| self.at_punct(t)) {
            let expected: Vec<String> = std::iter::once("`,`".to_string())
                .chain(terminators.iter().map(|t| format!("`{t}`")))
                .collect();
            return Err(self.error(&expected.join(" or ")));
        }
        Ok(out)
    }

    fn end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.error("end of line")),
        }
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let first = self.peek().cloned().expect("statement lines are nonempty");
        let keyword = match &first.kind {
            TokKind::Ident(s) => s.clone(),
            _ => return Err(self.error("a statement keyword")),
        };
        let statement = match keyword.as_str() {
            "qwp" => {
                self.pos += 1;
                Statement::Header {
                    version: self.integer()?,
                }
            }
            "system" => {
                self.pos += 1;
                let name = self.name("subsystem name")?;
                self.punct(':')?;
                let dim = self.integer()?;
                Statement::System { name, dim }
            }
            "basis" => {
                self.pos += 1;
                let name = self.name("basis name")?;
                self.keyword("on")?;
                let subsystem = self.name("subsystem name")?;
                self.punct('=')?;
                let open = self.punct('[')?;
                let mut rows = Vec::new();
                loop {
                    let label = self.label()?;
                    self.punct(':')?;
                    let comps = self.components(&[';', ']'])?;
                    rows.push((label, comps));
                    if self.at_punct(']') {
                        self.pos += 1;
                        break;
                    }
                    self.punct(';')?;
                }
                Statement::Basis(BasisSyntax {
                    name,
                    subsystem,
                    rows,
                    open,
                })
            }
            "prepare" => {
                self.pos += 1;
                let subsystem = self.name("subsystem name")?;
                let vector = if self.at_punct('[') {
                    let open = self.punct('[')?;
                    let comps = self.components(&[']'])?;
                    self.punct(']')?;
                    Vector::Components(comps, open)
                } else {
                    Vector::Label(self.label()?)
                };
                Statement::Step {
                    step: StepSyntax::Prepare { subsystem, vector },
                }
            }
            "measure" | "catmeasure" => {
                self.pos += 1;
                let target = self.name(if keyword == "measure" { "target name" } else { "agent name" })?;
                self.keyword("in")?;
                let basis = self.name("basis name")?;
                self.keyword("record")?;
                let observer = self.name("observer name")?;
                Statement::Step {
                    step: StepSyntax::Measure {
                        catalytic: keyword == "catmeasure",
                        target,
                        basis,
                        observer,
                    },
                }
            }
            "collapse" => {
                self.pos += 1;
                let target = self.name("target name")?;
                self.keyword("in")?;
                let basis = self.name("basis name")?;
                Statement::Step {
                    step: StepSyntax::Collapse { target, basis },
                }
            }
            "report" => {
                self.pos += 1;
                let mut names = vec![self.name("subsystem name")?];
                while !self.at_keyword("in") && self.peek().is_some() {
                    names.push(self.name("subsystem name")?);
                }
                self.keyword("in")?;
                let mut bases = vec![self.name("basis name")?];
                while self.peek().is_some() {
                    bases.push(self.name("basis name")?);
                }
                Statement::Step {
                    step: StepSyntax::Report {
                        names,
                        bases,
                        span: first.span,
                    },
                }
            }
            _ => {
                return Err(ParseError {
                    span: first.span,
                    kind: ErrorKind::Syntax,
                    message: format!("unknown statement `{keyword}`"),
                })
            }
        };
        self.end()?;
        Ok(statement)
    }
}

fn semantic(span: SourceSpan, message: impl Into<String>) -> ParseError {
    ParseError {
        span,
        kind: ErrorKind::Semantic,
        message: message.into(),
    }
}

/// Names declared so far and the ones whose declaration failed.
#[derive(Default)]
struct Scope {
    layout: SystemLayout,
    failed_systems: HashSet<String>,
    bases: Vec<Basis>,
    failed_bases: HashSet<String>,
}

/// Why a step could not be resolved: a reportable error, or a reference to a
/// name whose declaration already produced one.
enum Unresolved {
    Error(ParseError),
    Suppressed,
}

impl From<ParseError> for Unresolved {
    fn from(e: ParseError) -> Self {
        Unresolved::Error(e)
    }
}

impl Scope {
    fn declare_system(&mut self, name: Name, dim: Token) -> Result<(), ParseError> {
        let result = (|| {
            if self.layout.position(&name.text).is_some() {
                return Err(semantic(name.span, format!("subsystem `{}` declared twice", name.text)));
            }
            let d = match &dim.kind {
                TokKind::Number { lexeme, .. } => lexeme.parse::<usize>().ok(),
                _ => None,
            };
            match d {
                Some(d) if d >= 2 => {
                    self.layout = self.layout.appended(name.text.clone(), d).expect("name and dimension checked");
                    Ok(())
                }
                _ => Err(semantic(dim.span, "dimension must be an integer of at least 2")),
            }
        })();
        if result.is_err() && self.layout.position(&name.text).is_none() {
            self.failed_systems.insert(name.text);
        }
        result
    }

    fn declare_basis(&mut self, syntax: BasisSyntax) -> Result<(), Unresolved> {
        let BasisSyntax {
            name,
            subsystem,
            rows,
            open,
        } = syntax;
        if self.bases.iter().any(|b| b.name() == name.text) {
            return Err(semantic(name.span, format!("basis `{}` declared twice", name.text)).into());
        }
        let result = (|| {
            let dim = self.system_dim(&subsystem)?;
            if rows.len() != dim {
                return Err(semantic(
                    open,
                    format!("`{}` has dimension {dim} but the basis lists {} vectors", subsystem.text, rows.len()),
                )
                .into());
            }
            let mut labels = HashSet::new();
            for (label, comps) in &rows {
                if comps.len() != dim {
                    return Err(semantic(
                        label.span,
                        format!("vector `{}` has {} components, expected {dim}", label.text, comps.len()),
                    )
                    .into());
                }
                if !labels.insert(label.text.as_str()) {
                    return Err(semantic(label.span, format!("duplicate label `{}`", label.text)).into());
                }
            }
            let vectors = rows.iter().map(|(l, c)| (l.text.clone(), c.clone())).collect();
            Basis::new(name.text.clone(), subsystem.text.clone(), vectors)
                .map_err(|e| semantic(name.span, e.to_string()).into())
        })();
        match result {
            Ok(b) => {
                self.bases.push(b);
                Ok(())
            }
            Err(e) => {
                self.failed_bases.insert(name.text);
                Err(e)
            }
        }
    }

    fn system_dim(&self, name: &Name) -> Result<usize, Unresolved> {
        if self.failed_systems.contains(&name.text) {
            return Err(Unresolved::Suppressed);
        }
        self.layout
            .dim_of(&name.text)
            .map_err(|_| semantic(name.span, format!("undeclared subsystem `{}`", name.text)).into())
    }

    fn basis(&self, name: &Name) -> Result<&Basis, Unresolved> {
        if self.failed_bases.contains(&name.text) {
            return Err(Unresolved::Suppressed);
        }
        self.bases
            .iter()
            .find(|b| b.name() == name.text)
            .ok_or_else(|| semantic(name.span, format!("undeclared basis `{}`", name.text)).into())
    }

    /// A declared basis that lives on `target`.
    fn basis_on(&self, name: &Name, target: &Name) -> Result<Basis, Unresolved> {
        let basis = self.basis(name)?;
        if basis.subsystem() != target.text {
            return Err(semantic(
                name.span,
                format!("basis `{}` is declared on `{}`, not on `{}`", name.text, basis.subsystem(), target.text),
            )
            .into());
        }
        Ok(basis.clone())
    }

    /// Protocol carrying the declarations only, used to resolve observers
    /// and labels exactly as [`Protocol`] does.
    fn declarations(&self) -> Protocol {
        Protocol::new(self.layout.clone(), self.bases.clone(), vec![]).expect("declarations were validated one by one")
    }

    fn resolve(&self, decls: &Protocol, step: &StepSyntax, evolving: bool, line_span: SourceSpan) -> Result<Step, Unresolved> {
        match step {
            StepSyntax::Prepare { subsystem, vector } => {
                let dim = self.system_dim(subsystem)?;
                if evolving {
                    return Err(semantic(line_span, "`prepare` must come before all other steps").into());
                }
                match vector {
                    Vector::Label(label) => {
                        let v = decls.prepare_label(&subsystem.text, &label.text).ok_or_else(|| {
                            semantic(label.span, format!("no basis on `{}` has a vector `{}`", subsystem.text, label.text))
                        })?;
                        Ok(Step::Prepare {
                            subsystem: subsystem.text.clone(),
                            vector: v.to_vec(),
                            label: Some(label.text.clone()),
                        })
                    }
                    Vector::Components(comps, span) => {
                        if comps.len() != dim {
                            return Err(semantic(
                                *span,
                                format!("`{}` has dimension {dim}, the vector has {} components", subsystem.text, comps.len()),
                            )
                            .into());
                        }
                        if norm_of(comps) <= NORM_TOLERANCE {
                            return Err(semantic(*span, "cannot prepare the zero vector").into());
                        }
                        Ok(Step::Prepare {
                            subsystem: subsystem.text.clone(),
                            vector: comps.clone(),
                            label: None,
                        })
                    }
                }
            }
            StepSyntax::Measure {
                catalytic,
                target,
                basis,
                observer,
            } => {
                self.system_dim(target)?;
                let observer_dim = self.system_dim(observer)?;
                let basis = self.basis_on(basis, target)?;
                if observer.text == target.text {
                    return Err(semantic(observer.span, format!("`{}` cannot record its own measurement", target.text)).into());
                }
                if observer_dim < basis.dim() {
                    return Err(semantic(
                        observer.span,
                        format!(
                            "observer `{}` of dimension {observer_dim} cannot hold {} records",
                            observer.text,
                            basis.dim()
                        ),
                    )
                    .into());
                }
                let register = decls
                    .observer(&observer.text, basis.dim())
                    .map_err(|e| semantic(observer.span, e.to_string()))?;
                Ok(if *catalytic {
                    Step::CatalyticPremeasure {
                        agent: target.text.clone(),
                        basis,
                        observer: register,
                    }
                } else {
                    Step::Premeasure {
                        target: target.text.clone(),
                        basis,
                        observer: register,
                    }
                })
            }
            StepSyntax::Collapse { target, basis } => {
                self.system_dim(target)?;
                Ok(Step::Collapse {
                    target: target.text.clone(),
                    basis: self.basis_on(basis, target)?,
                })
            }
            StepSyntax::Report { names, bases, span } => {
                let mut suppressed = false;
                let mut first_error = None;
                let mut targets = Vec::new();
                let mut seen = HashSet::new();
                for (k, name) in names.iter().enumerate() {
                    let resolved = self.system_dim(name).and_then(|_| {
                        if !seen.insert(name.text.as_str()) {
                            return Err(semantic(name.span, format!("`{}` reported twice", name.text)).into());
                        }
                        match bases.get(k) {
                            Some(b) => self.basis_on(b, name),
                            None => Err(Unresolved::Suppressed),
                        }
                    });
                    match resolved {
                        Ok(b) => targets.push((name.text.clone(), b)),
                        Err(Unresolved::Suppressed) => suppressed = true,
                        Err(Unresolved::Error(e)) => {
                            first_error.get_or_insert(e);
                        }
                    }
                }
                if let Some(e) = first_error {
                    return Err(e.into());
                }
                if names.len() != bases.len() {
                    let at = bases.get(names.len()).map_or(*span, |b| b.span);
                    return Err(semantic(
                        at,
                        format!("{} subsystems but {} bases", names.len(), bases.len()),
                    )
                    .into());
                }
                if suppressed {
                    return Err(Unresolved::Suppressed);
                }
                Ok(Step::Report { targets })
            }
        }
    }
}

/// One nonblank line after the syntax pass.
enum Entry {
    Statement(Statement, SourceSpan),
    /// A `system` or `basis` line that failed to parse; its name (if any)
    /// is still claimed so that later uses stay quiet.
    BrokenSystem(Option<String>),
    BrokenBasis(Option<String>),
}

fn broken_declaration(tokens: &[Token]) -> Option<Entry> {
    let name = match tokens.get(1).map(|t| &t.kind) {
        Some(TokKind::Ident(n)) if !KEYWORDS.contains(&n.as_str()) => Some(n.clone()),
        _ => None,
    };
    match tokens.first().map(|t| &t.kind) {
        Some(TokKind::Ident(k)) if k == "system" => Some(Entry::BrokenSystem(name)),
        Some(TokKind::Ident(k)) if k == "basis" => Some(Entry::BrokenBasis(name)),
        _ => None,
    }
}

fn is_header(tokens: &[Token]) -> bool {
    matches!(tokens.first().map(|t| &t.kind), Some(TokKind::Ident(k)) if k == "qwp")
}

/// Parses a `.qwp` document into a validated [`Protocol`].
pub fn parse(text: &str) -> Result<Protocol, Vec<ParseError>> {
    let mut errors = Vec::new();
    let mut entries = Vec::new();
    let mut first_line = true;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let tokens = match lex_line(line_no, raw) {
            Ok(t) => t,
            Err(e) => {
                first_line = false;
                let prefix: String = raw.chars().take(e.span.column - 1).collect();
                if let Ok(tokens) = lex_line(line_no, &prefix) {
                    entries.extend(broken_declaration(&tokens));
                }
                errors.push(e);
                continue;
            }
        };
        if tokens.is_empty() {
            continue;
        }
        let first_span = tokens[0].span;
        if first_line && !is_header(&tokens) {
            errors.push(ParseError {
                span: first_span,
                kind: ErrorKind::Syntax,
                message: "expected the `qwp 1` header".into(),
            });
        } else if !first_line && is_header(&tokens) {
            errors.push(ParseError {
                span: first_span,
                kind: ErrorKind::Syntax,
                message: "the `qwp` header must be the first statement".into(),
            });
            continue;
        }
        first_line = false;
        let mut parser = LineParser {
            tokens,
            pos: 0,
            line: line_no,
            end_column: raw.chars().count() + 1,
        };
        match parser.statement() {
            Ok(s) => entries.push(Entry::Statement(s, first_span)),
            Err(e) => {
                entries.extend(broken_declaration(&parser.tokens));
                errors.push(e);
            }
        }
    }

    let mut scope = Scope::default();
    let mut any_system = false;
    let mut pending = Vec::new();
    for entry in entries {
        match entry {
            Entry::BrokenSystem(name) => {
                any_system = true;
                scope.failed_systems.extend(name);
            }
            Entry::BrokenBasis(name) => scope.failed_bases.extend(name),
            Entry::Statement(Statement::Header { version }, _) => {
                if !matches!(&version.kind, TokKind::Number { lexeme, .. } if lexeme == "1") {
                    errors.push(semantic(version.span, "unsupported format version; expected `qwp 1`"));
                }
            }
            Entry::Statement(Statement::System { name, dim }, _) => {
                any_system = true;
                if let Err(e) = scope.declare_system(name, dim) {
                    errors.push(e);
                }
            }
            Entry::Statement(Statement::Basis(b), _) => {
                if let Err(Unresolved::Error(e)) = scope.declare_basis(b) {
                    errors.push(e);
                }
            }
            Entry::Statement(Statement::Step { step }, span) => pending.push((step, span)),
        }
    }

    if !any_system {
        errors.push(semantic(
            SourceSpan {
                line: 1,
                column: 1,
                length: 0,
            },
            "no system declaration",
        ));
    }

    let decls = scope.declarations();
    let mut steps = Vec::new();
    let mut evolving = false;
    for (step, span) in &pending {
        match scope.resolve(&decls, step, evolving, *span) {
            Ok(s) => steps.push(s),
            Err(Unresolved::Error(e)) => errors.push(e),
            Err(Unresolved::Suppressed) => {}
        }
        evolving |= !matches!(step, StepSyntax::Prepare { .. });
    }

    if errors.is_empty() {
        return Protocol::new(scope.layout, scope.bases, steps).map_err(|e| {
            vec![semantic(
                SourceSpan {
                    line: 1,
                    column: 1,
                    length: 0,
                },
                e.to_string(),
            )]
        });
    }
    errors.sort_by_key(|e| e.span);
    Err(errors)
}

/// Canonical number text: `1/sqrt2` and `1/sqrt8` (signed) for those exact
/// values, otherwise the shortest decimal that reads back to the same `f64`.
pub fn format_number(x: f64) -> String {
    let magnitude = x.abs();
    let sign = if x < 0.0 { "-" } else { "" };
    if magnitude == FRAC_1_SQRT_2 {
        format!("{sign}1/sqrt2")
    } else if magnitude == 0.5 * FRAC_1_SQRT_2 {
        format!("{sign}1/sqrt8")
    } else if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format_number(z.re)
    } else {
        format!("({}, {})", format_number(z.re), format_number(z.im))
    }
}

fn format_components(v: &[Complex64]) -> String {
    v.iter().map(|z| format_complex(*z)).collect::<Vec<_>>().join(", ")
}

/// Canonical text of a protocol: header, systems, bases, then steps, with
/// single spaces and no comments.
pub fn serialize(protocol: &Protocol) -> String {
    let mut out = String::from("qwp 1\n");
    for s in protocol.layout().subsystems() {
        out.push_str(&format!("system {}:{}\n", s.name(), s.dim()));
    }
    for b in protocol.bases() {
        let rows: Vec<String> = b
            .vectors()
            .iter()
            .map(|v| format!("{}: {}", v.label(), format_components(v.components())))
            .collect();
        out.push_str(&format!("basis {} on {} = [{}]\n", b.name(), b.subsystem(), rows.join("; ")));
    }
    for step in protocol.steps() {
        let line = match step {
            Step::Prepare {
                subsystem,
                vector,
                label: None,
            } => format!("prepare {subsystem} [{}]", format_components(vector)),
            other => other.to_string(),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Convenience for callers that want the first error as a library error.
pub fn parse_or_first_error(text: &str) -> crate::Result<Protocol> {
    parse(text).map_err(|errors| {
        let first = errors.into_iter().next().expect("parse failures carry at least one error");
        crate::Error::InvalidProtocol(first.to_string())
    })
}

/// Number of statements of each kind, keyed by keyword; handy for summaries.
pub fn statement_counts(protocol: &Protocol) -> HashMap<&'static str, usize> {
    let mut counts = HashMap::new();
    counts.insert("system", protocol.layout().len());
    counts.insert("basis", protocol.bases().len());
    for step in protocol.steps() {
        *counts.entry(step.kind().as_str()).or_insert(0) += 1;
    }
    counts
}
