//! Abstract syntax, parser, validator and pretty-printer for the quantum while-language.
//!
//! ```text
//! program  := "qubits" IDENT+ ";" decl* stmt+
//! decl     := "unitary" NAME "=" matrix ";"
//!           | "space"   NAME "=" "span" "(" vec ("," vec)* ")" ";"
//! stmt     := "skip" ";" | qlist ":=" "|0>" ";" | qlist "*=" uref ";"
//!           | "assert" pref "on" qlist ";"
//!           | "if" pref "on" qlist "{" stmt+ "}" "else" "{" stmt+ "}"
//!           | "while" pref "on" qlist "{" stmt+ "}"
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{embed, ComplexMatrix, LinalgError, QubitLayout, Tolerances, C64, ONE, ZERO};
use crate::subspace::Subspace;

pub const BUILTIN_GATES: [&str; 10] = ["I", "H", "X", "Y", "Z", "S", "T", "CNOT", "CZ", "SWAP"];
pub const BUILTIN_SPACES: [&str; 3] = ["zero", "one", "full"];
const KEYWORDS: [&str; 10] = [
    "qubits", "unitary", "space", "span", "skip", "assert", "if", "else", "while", "on",
];

/// Source position of a statement or declaration. Ignored by structural equality.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Span {
    /// Byte offsets `[start, end)` into the source text.
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stmt {
    #[serde(flatten)]
    pub kind: StmtKind,
    pub span: Span,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Self {
            kind,
            span: Span::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "stmt", rename_all = "snake_case")]
pub enum StmtKind {
    Skip,
    Init {
        targets: Vec<String>,
    },
    Unitary {
        targets: Vec<String>,
        gate: String,
    },
    Assert {
        targets: Vec<String>,
        space: String,
    },
    If {
        targets: Vec<String>,
        space: String,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    While {
        targets: Vec<String>,
        space: String,
        body: Vec<Stmt>,
    },
}

impl StmtKind {
    pub fn targets(&self) -> &[String] {
        match self {
            StmtKind::Skip => &[],
            StmtKind::Init { targets }
            | StmtKind::Unitary { targets, .. }
            | StmtKind::Assert { targets, .. }
            | StmtKind::If { targets, .. }
            | StmtKind::While { targets, .. } => targets,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnitaryDecl {
    pub matrix: ComplexMatrix,
    pub span: Span,
}

impl PartialEq for UnitaryDecl {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

#[derive(Debug, Clone)]
pub struct SpaceDecl {
    /// Spanning vectors as written, each of length `2^k`.
    pub vectors: Vec<Vec<C64>>,
    pub subspace: Subspace,
    pub span: Span,
}

impl PartialEq for SpaceDecl {
    fn eq(&self, other: &Self) -> bool {
        self.vectors == other.vectors
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub layout: QubitLayout,
    pub unitaries: BTreeMap<String, UnitaryDecl>,
    pub spaces: BTreeMap<String, SpaceDecl>,
    pub body: Vec<Stmt>,
}

impl Program {
    pub fn new(layout: QubitLayout) -> Self {
        Self {
            layout,
            unitaries: BTreeMap::new(),
            spaces: BTreeMap::new(),
            body: Vec::new(),
        }
    }

    pub fn with_body(mut self, body: Vec<Stmt>) -> Self {
        self.body = body;
        self
    }

    pub fn declare_unitary(&mut self, name: &str, matrix: ComplexMatrix) {
        self.unitaries.insert(
            name.to_string(),
            UnitaryDecl {
                matrix,
                span: Span::default(),
            },
        );
    }

    pub fn declare_space(&mut self, name: &str, vectors: Vec<Vec<C64>>) -> Result<(), LinalgError> {
        let dim = vectors.first().map_or(1, Vec::len);
        let subspace = Subspace::span(dim, &vectors, &Tolerances::default())?;
        self.spaces.insert(
            name.to_string(),
            SpaceDecl {
                vectors,
                subspace,
                span: Span::default(),
            },
        );
        Ok(())
    }

    /// Matrix of a builtin or declared gate.
    pub fn gate(&self, name: &str) -> Option<ComplexMatrix> {
        self.unitaries
            .get(name)
            .map(|d| d.matrix.clone())
            .or_else(|| builtin_gate(name))
    }

    /// Local subspace named `name` on `arity` qubits.
    pub fn space(&self, name: &str, arity: usize) -> Option<Subspace> {
        if let Some(d) = self.spaces.get(name) {
            return Some(d.subspace.clone());
        }
        let dim = 1usize << arity;
        match name {
            "zero" => Some(Subspace::computational(dim, &[0])),
            "one" => Some(Subspace::computational(dim, &[dim - 1])),
            "full" => Some(Subspace::full(dim)),
            _ => None,
        }
    }

    /// Gate `name` on `targets`, extended to the whole layout.
    pub fn gate_operator(
        &self,
        targets: &[String],
        name: &str,
    ) -> Result<ComplexMatrix, LinalgError> {
        let m = self
            .gate(name)
            .ok_or_else(|| LinalgError::DimensionMismatch(format!("unknown unitary `{name}`")))?;
        embed(&m, targets, &self.layout)
    }

    /// Projector onto `space` (or its complement) on `targets`, extended to the whole layout.
    pub fn guard_operator(
        &self,
        targets: &[String],
        space: &str,
        negate: bool,
    ) -> Result<ComplexMatrix, LinalgError> {
        let local = self
            .space(space, targets.len())
            .ok_or_else(|| LinalgError::DimensionMismatch(format!("unknown space `{space}`")))?;
        let local = if negate {
            local.orthocomplement()
        } else {
            local
        };
        embed(&local.projector(), targets, &self.layout)
    }

    /// Sequential composition `self; other` over the same layout.
    pub fn concat(&self, other: &Program) -> Result<Program, String> {
        if self.layout != other.layout {
            return Err("programs declare different qubits".into());
        }
        let mut out = self.clone();
        for (name, d) in &other.unitaries {
            match out.unitaries.get(name) {
                Some(existing) if existing != d => {
                    return Err(format!("conflicting declarations of unitary `{name}`"))
                }
                _ => {
                    out.unitaries.insert(name.clone(), d.clone());
                }
            }
        }
        for (name, d) in &other.spaces {
            match out.spaces.get(name) {
                Some(existing) if existing != d => {
                    return Err(format!("conflicting declarations of space `{name}`"))
                }
                _ => {
                    out.spaces.insert(name.clone(), d.clone());
                }
            }
        }
        out.body.extend(other.body.iter().cloned());
        Ok(out)
    }

    pub fn has_loops(&self) -> bool {
        fn any_loop(body: &[Stmt]) -> bool {
            body.iter().any(|s| match &s.kind {
                StmtKind::While { .. } => true,
                StmtKind::If {
                    then_branch,
                    else_branch,
                    ..
                } => any_loop(then_branch) || any_loop(else_branch),
                _ => false,
            })
        }
        any_loop(&self.body)
    }
}

pub fn builtin_gate(name: &str) -> Option<ComplexMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = C64::new(0.0, 1.0);
    let r = |v: &[f64], n: usize| ComplexMatrix::from_real(n, n, v);
    Some(match name {
        "I" => ComplexMatrix::identity(2),
        "H" => r(&[s, s, s, -s], 2),
        "X" => r(&[0., 1., 1., 0.], 2),
        "Y" => ComplexMatrix::from_vec(2, 2, vec![ZERO, -i, i, ZERO]).ok()?,
        "Z" => r(&[1., 0., 0., -1.], 2),
        "S" => ComplexMatrix::diag(&[ONE, i]),
        "T" => ComplexMatrix::diag(&[ONE, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]),
        "CNOT" => r(
            &[
                1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.,
            ],
            4,
        ),
        "CZ" => ComplexMatrix::diag(&[ONE, ONE, ONE, -ONE]),
        "SWAP" => r(
            &[
                1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.,
            ],
            4,
        ),
        _ => return None,
    })
}

// ---------------------------------------------------------------------------
// Diagnostics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiagnosticKind {
    DuplicateQubit,
    DuplicateTarget,
    DuplicateDeclaration,
    ShadowsBuiltin,
    UnknownVariable,
    UnknownUnitary,
    UnknownSpace,
    NotUnitary,
    NotSquare,
    DimensionMismatch,
    MixedKetLength,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {:?}: {}",
            self.line, self.col, self.kind, self.message
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("invalid program: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

fn diag(kind: DiagnosticKind, span: Span, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        kind,
        line: span.line,
        col: span.col,
        message: message.into(),
    }
}

/// Checks every declaration and statement; an empty result means the program is well formed.
pub fn validate(p: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (name, d) in &p.unitaries {
        if BUILTIN_GATES.contains(&name.as_str()) {
            out.push(diag(
                DiagnosticKind::ShadowsBuiltin,
                d.span,
                format!("unitary `{name}` shadows a builtin gate"),
            ));
        }
        let m = &d.matrix;
        if !m.is_square() || !m.rows().is_power_of_two() || m.rows() < 2 {
            out.push(diag(
                DiagnosticKind::NotSquare,
                d.span,
                format!(
                    "unitary `{name}` is {}x{}, expected 2^k x 2^k",
                    m.rows(),
                    m.cols()
                ),
            ));
        } else {
            let dev = m.unitarity_deviation();
            if dev > 1e-9 {
                out.push(diag(
                    DiagnosticKind::NotUnitary,
                    d.span,
                    format!("unitary `{name}` has |U†U - I| = {dev:e}"),
                ));
            }
        }
    }
    for (name, d) in &p.spaces {
        if BUILTIN_SPACES.contains(&name.as_str()) {
            out.push(diag(
                DiagnosticKind::ShadowsBuiltin,
                d.span,
                format!("space `{name}` shadows a builtin space"),
            ));
        }
        let dim = d.subspace.ambient_dim();
        if !dim.is_power_of_two() || dim < 2 || d.vectors.iter().any(|v| v.len() != dim) {
            out.push(diag(
                DiagnosticKind::MixedKetLength,
                d.span,
                format!("space `{name}` mixes kets of different lengths"),
            ));
        }
    }
    validate_body(p, &p.body, &mut out);
    out
}

fn validate_body(p: &Program, body: &[Stmt], out: &mut Vec<Diagnostic>) {
    for s in body {
        let targets = s.kind.targets();
        let mut seen = HashSet::new();
        for t in targets {
            if !p.layout.contains(t) {
                out.push(diag(
                    DiagnosticKind::UnknownVariable,
                    s.span,
                    format!("unknown qubit `{t}`"),
                ));
            }
            if !seen.insert(t) {
                out.push(diag(
                    DiagnosticKind::DuplicateTarget,
                    s.span,
                    format!("qubit `{t}` appears twice"),
                ));
            }
        }
        let k = targets.len();
        match &s.kind {
            StmtKind::Skip | StmtKind::Init { .. } => {}
            StmtKind::Unitary { gate, .. } => match p.gate(gate) {
                None => out.push(diag(
                    DiagnosticKind::UnknownUnitary,
                    s.span,
                    format!("unknown unitary `{gate}`"),
                )),
                Some(m) if m.rows() != 1 << k => out.push(diag(
                    DiagnosticKind::DimensionMismatch,
                    s.span,
                    format!(
                        "unitary `{gate}` is {}x{} but applied to {k} qubit(s)",
                        m.rows(),
                        m.cols()
                    ),
                )),
                Some(_) => {}
            },
            StmtKind::Assert { space, .. }
            | StmtKind::If { space, .. }
            | StmtKind::While { space, .. } => match p.space(space, k) {
                None => out.push(diag(
                    DiagnosticKind::UnknownSpace,
                    s.span,
                    format!("unknown space `{space}`"),
                )),
                Some(sub) if sub.ambient_dim() != 1 << k => out.push(diag(
                    DiagnosticKind::DimensionMismatch,
                    s.span,
                    format!(
                        "space `{space}` lives in C^{} but is used on {k} qubit(s)",
                        sub.ambient_dim()
                    ),
                )),
                Some(_) => {}
            },
        }
        match &s.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                validate_body(p, then_branch, out);
                validate_body(p, else_branch, out);
            }
            StmtKind::While { body, .. } => validate_body(p, body, out),
            _ => {}
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Imag(f64),
    Ket(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(x) => write!(f, "number {x}"),
            Tok::Imag(x) => write!(f, "imaginary {x}i"),
            Tok::Ket(b) => write!(f, "`|{b}>`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    start: usize,
    end: usize,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    let err = |i: usize, line: usize, line_start: usize, expected: &str, found: String| {
        ParseError::Syntax {
            line,
            col: i - line_start + 1,
            expected: expected.to_string(),
            found,
        }
    };
    while i < bytes.len() {
        let ch = bytes[i];
        if ch == b'\n' {
            line += 1;
            i += 1;
            line_start = i;
            continue;
        }
        if ch.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if ch == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let col = i - line_start + 1;
        let tok = if ch.is_ascii_alphabetic() || ch == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(src[start..i].to_string())
        } else if ch.is_ascii_digit()
            || (ch == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))
        {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let value: f64 = src[start..i].parse().map_err(|_| {
                err(
                    start,
                    line,
                    line_start,
                    "number",
                    format!("`{}`", &src[start..i]),
                )
            })?;
            let imag = i < bytes.len()
                && bytes[i] == b'i'
                && !bytes
                    .get(i + 1)
                    .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_');
            if imag {
                i += 1;
                Tok::Imag(value)
            } else {
                Tok::Num(value)
            }
        } else if ch == b'|' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j] == b'0' || bytes[j] == b'1') {
                j += 1;
            }
            if j == i + 1 || bytes.get(j) != Some(&b'>') {
                return Err(err(
                    i,
                    line,
                    line_start,
                    "ket `|bits>`",
                    "malformed ket".into(),
                ));
            }
            i = j + 1;
            Tok::Ket(src[start + 1..j].to_string())
        } else {
            let two = src.get(i..i + 2).unwrap_or("");
            let p: &'static str = match two {
                ":=" => ":=",
                "*=" => "*=",
                _ => match ch {
                    b';' => ";",
                    b',' => ",",
                    b'=' => "=",
                    b'[' => "[",
                    b']' => "]",
                    b'(' => "(",
                    b')' => ")",
                    b'{' => "{",
                    b'}' => "}",
                    b'*' => "*",
                    b'+' => "+",
                    b'-' => "-",
                    _ => {
                        let c = src[i..].chars().next().unwrap_or('?');
                        return Err(err(i, line, line_start, "token", format!("`{c}`")));
                    }
                },
            };
            i += p.len();
            Tok::Punct(p)
        };
        toks.push(Token {
            tok,
            start,
            end: i,
            line,
            col,
        });
    }
    toks.push(Token {
        tok: Tok::Eof,
        start: src.len(),
        end: src.len(),
        line,
        col: src.len() - line_start + 1,
    });
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diagnostics: Vec<Diagnostic>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        let t = self.peek();
        Err(ParseError::Syntax {
            line: t.line,
            col: t.col,
            expected: expected.to_string(),
            found: t.tok.to_string(),
        })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Token> {
        if self.is_punct(p) {
            Ok(self.bump())
        } else {
            self.error(&format!("`{p}`"))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Token> {
        if self.is_keyword(kw) {
            Ok(self.bump())
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.error(what),
        }
    }

    fn span_from(&self, first: &Token) -> Span {
        let last = &self.toks[self.pos.saturating_sub(1)];
        Span {
            start: first.start,
            end: last.end,
            line: first.line,
            col: first.col,
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let kw = self.expect_keyword("qubits")?;
        let mut names = Vec::new();
        while let Tok::Ident(_) = self.peek().tok {
            let t = self.peek().clone();
            let name = self.ident("qubit name")?;
            if names.contains(&name) {
                self.diagnostics.push(diag(
                    DiagnosticKind::DuplicateQubit,
                    self.span_from(&t),
                    format!("qubit `{name}` declared twice"),
                ));
            } else {
                names.push(name);
            }
        }
        if names.is_empty() {
            return self.error("qubit name");
        }
        self.expect_punct(";")?;
        let _ = kw;
        let layout = QubitLayout::new(&names).expect("duplicates filtered");
        let mut program = Program::new(layout);
        loop {
            if self.is_keyword("unitary") {
                self.unitary_decl(&mut program)?;
            } else if self.is_keyword("space") {
                self.space_decl(&mut program)?;
            } else {
                break;
            }
        }
        program.body = self.stmts_until_eof()?;
        Ok(program)
    }

    fn check_fresh(&mut self, program: &Program, name: &str, span: Span) {
        if program.unitaries.contains_key(name) || program.spaces.contains_key(name) {
            self.diagnostics.push(diag(
                DiagnosticKind::DuplicateDeclaration,
                span,
                format!("`{name}` declared twice"),
            ));
        }
    }

    fn unitary_decl(&mut self, program: &mut Program) -> PResult<()> {
        let first = self.expect_keyword("unitary")?;
        let name = self.ident("unitary name")?;
        self.expect_punct("=")?;
        self.expect_punct("[")?;
        let mut rows = vec![self.row()?];
        while self.is_punct(",") {
            self.bump();
            rows.push(self.row()?);
        }
        self.expect_punct("]")?;
        self.expect_punct(";")?;
        let span = self.span_from(&first);
        self.check_fresh(program, &name, span);
        let matrix = match ComplexMatrix::from_rows(&rows) {
            Ok(m) => m,
            Err(_) => {
                self.diagnostics.push(diag(
                    DiagnosticKind::NotSquare,
                    span,
                    format!("unitary `{name}` has rows of different lengths"),
                ));
                ComplexMatrix::identity(2)
            }
        };
        program.unitaries.insert(name, UnitaryDecl { matrix, span });
        Ok(())
    }

    fn row(&mut self) -> PResult<Vec<C64>> {
        self.expect_punct("[")?;
        let mut row = vec![self.cnum()?];
        while self.is_punct(",") {
            self.bump();
            row.push(self.cnum()?);
        }
        self.expect_punct("]")?;
        Ok(row)
    }

    /// `FLOAT | FLOAT ("+"|"-") FLOAT "i"`, with optional leading minus.
    fn cnum(&mut self) -> PResult<C64> {
        let neg = if self.is_punct("-") {
            self.bump();
            true
        } else {
            false
        };
        let sign = if neg { -1.0 } else { 1.0 };
        let mut z = match self.peek().tok {
            Tok::Num(x) => {
                self.bump();
                C64::new(sign * x, 0.0)
            }
            Tok::Imag(x) => {
                self.bump();
                return Ok(C64::new(0.0, sign * x));
            }
            _ => return self.error("number"),
        };
        if let (Tok::Punct(p @ ("+" | "-")), Tok::Imag(y)) =
            (self.peek_at(0).clone(), self.peek_at(1).clone())
        {
            self.bump();
            self.bump();
            z.im = if p == "+" { y } else { -y };
        }
        Ok(z)
    }

    fn space_decl(&mut self, program: &mut Program) -> PResult<()> {
        let first = self.expect_keyword("space")?;
        let name = self.ident("space name")?;
        self.expect_punct("=")?;
        self.expect_keyword("span")?;
        self.expect_punct("(")?;
        let mut vecs = vec![self.vector()?];
        while self.is_punct(",") {
            self.bump();
            vecs.push(self.vector()?);
        }
        self.expect_punct(")")?;
        self.expect_punct(";")?;
        let span = self.span_from(&first);
        self.check_fresh(program, &name, span);
        let k = vecs[0][0].1.len();
        if vecs.iter().flatten().any(|(_, bits)| bits.len() != k) {
            self.diagnostics.push(diag(
                DiagnosticKind::MixedKetLength,
                span,
                format!("space `{name}` mixes kets of different lengths"),
            ));
            return Ok(());
        }
        let dim = 1usize << k;
        let vectors: Vec<Vec<C64>> = vecs
            .iter()
            .map(|terms| {
                let mut v = vec![ZERO; dim];
                for (c, bits) in terms {
                    v[usize::from_str_radix(bits, 2).expect("lexer checked bits")] += c;
                }
                v
            })
            .collect();
        let subspace =
            Subspace::span(dim, &vectors, &Tolerances::default()).expect("uniform lengths");
        program.spaces.insert(
            name,
            SpaceDecl {
                vectors,
                subspace,
                span,
            },
        );
        Ok(())
    }

    fn vector(&mut self) -> PResult<Vec<(C64, String)>> {
        let mut terms = vec![self.term(1.0)?];
        loop {
            let sign = if self.is_punct("+") {
                1.0
            } else if self.is_punct("-") {
                -1.0
            } else {
                break;
            };
            self.bump();
            terms.push(self.term(sign)?);
        }
        Ok(terms)
    }

    fn term(&mut self, sign: f64) -> PResult<(C64, String)> {
        let coef = if let Tok::Ket(_) = self.peek().tok {
            C64::new(1.0, 0.0)
        } else {
            let c = self.cnum()?;
            self.expect_punct("*")?;
            c
        };
        match self.bump().tok {
            Tok::Ket(bits) => Ok((coef * sign, bits)),
            _ => {
                self.pos -= 1;
                self.error("ket `|bits>`")
            }
        }
    }

    fn stmts_until_eof(&mut self) -> PResult<Vec<Stmt>> {
        let mut body = vec![self.stmt()?];
        while self.peek().tok != Tok::Eof {
            body.push(self.stmt()?);
        }
        Ok(body)
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        let mut body = vec![self.stmt()?];
        while !self.is_punct("}") {
            body.push(self.stmt()?);
        }
        self.expect_punct("}")?;
        Ok(body)
    }

    fn qlist(&mut self) -> PResult<Vec<String>> {
        let mut q = vec![self.ident("qubit name")?];
        while self.is_punct(",") {
            self.bump();
            q.push(self.ident("qubit name")?);
        }
        Ok(q)
    }

    fn pref(&mut self) -> PResult<String> {
        self.ident("space name")
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let first = self.peek().clone();
        let kind = if self.is_keyword("skip") {
            self.bump();
            self.expect_punct(";")?;
            StmtKind::Skip
        } else if self.is_keyword("assert") {
            self.bump();
            let space = self.pref()?;
            self.expect_keyword("on")?;
            let targets = self.qlist()?;
            self.expect_punct(";")?;
            StmtKind::Assert { targets, space }
        } else if self.is_keyword("if") {
            self.bump();
            let space = self.pref()?;
            self.expect_keyword("on")?;
            let targets = self.qlist()?;
            let then_branch = self.block()?;
            self.expect_keyword("else")?;
            let else_branch = self.block()?;
            StmtKind::If {
                targets,
                space,
                then_branch,
                else_branch,
            }
        } else if self.is_keyword("while") {
            self.bump();
            let space = self.pref()?;
            self.expect_keyword("on")?;
            let targets = self.qlist()?;
            let body = self.block()?;
            StmtKind::While {
                targets,
                space,
                body,
            }
        } else if matches!(&self.peek().tok, Tok::Ident(s) if !KEYWORDS.contains(&s.as_str())) {
            let targets = self.qlist()?;
            if self.is_punct(":=") {
                self.bump();
                match &self.peek().tok {
                    Tok::Ket(bits) if bits.chars().all(|c| c == '0') => {
                        self.bump();
                    }
                    _ => return self.error("`|0>`"),
                }
                self.expect_punct(";")?;
                StmtKind::Init { targets }
            } else if self.is_punct("*=") {
                self.bump();
                let gate = self.ident("unitary name")?;
                self.expect_punct(";")?;
                StmtKind::Unitary { targets, gate }
            } else {
                return self.error("`:=` or `*=`");
            }
        } else {
            return self.error("statement");
        };
        Ok(Stmt {
            kind,
            span: self.span_from(&first),
        })
    }
}

/// Parses and validates a program.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
        diagnostics: Vec::new(),
    };
    let program = parser.program()?;
    let mut diagnostics = parser.diagnostics;
    diagnostics.extend(validate(&program));
    if diagnostics.is_empty() {
        Ok(program)
    } else {
        Err(ParseError::Invalid(diagnostics))
    }
}

// ---------------------------------------------------------------------------
// Pretty-printer

fn fmt_cnum(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im.is_sign_negative() {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

fn fmt_vector(v: &[C64]) -> String {
    let k = v.len().trailing_zeros() as usize;
    let bits = |i: usize| format!("{i:0k$b}");
    let terms: Vec<String> = v
        .iter()
        .enumerate()
        .filter(|(_, z)| **z != ZERO)
        .map(|(i, z)| format!("{}*|{}>", fmt_cnum(*z), bits(i)))
        .collect();
    if terms.is_empty() {
        format!("0*|{}>", bits(0))
    } else {
        terms.join(" + ")
    }
}

/// Concrete syntax of a program; `parse(&pretty(p))` reproduces `p`.
pub fn pretty(p: &Program) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qubits {};", p.layout.names().join(" "));
    for (name, d) in &p.unitaries {
        let rows: Vec<String> = (0..d.matrix.rows())
            .map(|r| {
                let entries: Vec<String> = d.matrix.row(r).iter().map(|z| fmt_cnum(*z)).collect();
                format!("[{}]", entries.join(", "))
            })
            .collect();
        let _ = writeln!(out, "unitary {name} = [{}];", rows.join(", "));
    }
    for (name, d) in &p.spaces {
        let vecs: Vec<String> = d.vectors.iter().map(|v| fmt_vector(v)).collect();
        let _ = writeln!(out, "space {name} = span({});", vecs.join(", "));
    }
    pretty_body(&p.body, 0, &mut out);
    out
}

pub fn pretty_stmts(body: &[Stmt]) -> String {
    let mut out = String::new();
    pretty_body(body, 0, &mut out);
    out
}

fn pretty_body(body: &[Stmt], indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    for s in body {
        match &s.kind {
            StmtKind::Skip => {
                let _ = writeln!(out, "{pad}skip;");
            }
            StmtKind::Init { targets } => {
                let _ = writeln!(out, "{pad}{} := |0>;", targets.join(", "));
            }
            StmtKind::Unitary { targets, gate } => {
                let _ = writeln!(out, "{pad}{} *= {gate};", targets.join(", "));
            }
            StmtKind::Assert { targets, space } => {
                let _ = writeln!(out, "{pad}assert {space} on {};", targets.join(", "));
            }
            StmtKind::If {
                targets,
                space,
                then_branch,
                else_branch,
            } => {
                let _ = writeln!(out, "{pad}if {space} on {} {{", targets.join(", "));
                pretty_body(then_branch, indent + 1, out);
                let _ = writeln!(out, "{pad}}} else {{");
                pretty_body(else_branch, indent + 1, out);
                let _ = writeln!(out, "{pad}}}");
            }
            StmtKind::While {
                targets,
                space,
                body,
            } => {
                let _ = writeln!(out, "{pad}while {space} on {} {{", targets.join(", "));
                pretty_body(body, indent + 1, out);
                let _ = writeln!(out, "{pad}}}");
            }
        }
    }
}

impl Serialize for Program {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            qubits: &'a [String],
            unitaries: BTreeMap<&'a str, Vec<Vec<C64>>>,
            spaces: BTreeMap<&'a str, &'a Vec<Vec<C64>>>,
            body: &'a [Stmt],
        }
        Wire {
            qubits: self.layout.names(),
            unitaries: self
                .unitaries
                .iter()
                .map(|(k, d)| {
                    (
                        k.as_str(),
                        (0..d.matrix.rows())
                            .map(|r| d.matrix.row(r).to_vec())
                            .collect(),
                    )
                })
                .collect(),
            spaces: self
                .spaces
                .iter()
                .map(|(k, d)| (k.as_str(), &d.vectors))
                .collect(),
            body: &self.body,
        }
        .serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(err: ParseError) -> Vec<DiagnosticKind> {
        match err {
            ParseError::Invalid(d) => d.into_iter().map(|d| d.kind).collect(),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn parse_skip() {
        let p = parse("qubits q0; skip;").unwrap();
        assert_eq!(p.body, vec![Stmt::new(StmtKind::Skip)]);
        assert_eq!(p.layout.names(), ["q0"]);
    }

    #[test]
    fn parse_cnot() {
        let p = parse("qubits q0 q1; q0,q1 *= CNOT;").unwrap();
        assert_eq!(
            p.body[0].kind,
            StmtKind::Unitary {
                targets: vec!["q0".into(), "q1".into()],
                gate: "CNOT".into()
            }
        );
    }

    #[test]
    fn duplicate_target_is_rejected() {
        let err = parse("qubits q0; q0,q0 := |0>;").unwrap_err();
        assert_eq!(kinds(err), vec![DiagnosticKind::DuplicateTarget]);
    }

    #[test]
    fn validate_examples() {
        let p = parse("qubits q; q *= H;").unwrap();
        assert!(validate(&p).is_empty());
        let err = parse("qubits q; unitary U = [[1, 0], [0, 2]]; q *= U;").unwrap_err();
        assert_eq!(kinds(err), vec![DiagnosticKind::NotUnitary]);
        let err = parse("qubits q; space P = span(|00>); assert P on q;").unwrap_err();
        assert_eq!(kinds(err), vec![DiagnosticKind::DimensionMismatch]);
    }

    #[test]
    fn diagnostics_carry_locations() {
        let err = parse("qubits q;\nskip;\n  r *= X;").unwrap_err();
        match err {
            ParseError::Invalid(d) => {
                assert_eq!(d[0].kind, DiagnosticKind::UnknownVariable);
                assert_eq!((d[0].line, d[0].col), (3, 3));
            }
            other => panic!("{other}"),
        }
        match parse("qubits q;\nq *= ;").unwrap_err() {
            ParseError::Syntax { line, col, .. } => assert_eq!((line, col), (2, 6)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn complex_literals_and_kets() {
        let src = "qubits a b;\n\
                   unitary U = [[0, -1i], [1i, 0]];\n\
                   space P = span(0.5+0.5i*|01> - 2*|10>, |11>);\n\
                   a *= U; assert P on b, a;";
        let p = parse(src).unwrap();
        let u = &p.unitaries["U"].matrix;
        assert_eq!(u[(0, 1)], C64::new(0.0, -1.0));
        let v = &p.spaces["P"].vectors[0];
        assert_eq!(v[1], C64::new(0.5, 0.5));
        assert_eq!(v[2], C64::new(-2.0, 0.0));
        assert_eq!(p.spaces["P"].subspace.dim(), 2);
    }

    #[test]
    fn nested_blocks_and_comments() {
        let src = "qubits q r; // header\n\
                   while one on q { q *= X; if zero on r { skip; } else { r := |0>; } }";
        let p = parse(src).unwrap();
        match &p.body[0].kind {
            StmtKind::While { body, .. } => assert_eq!(body.len(), 2),
            k => panic!("{k:?}"),
        }
        assert!(p.has_loops());
    }

    #[test]
    fn spans_cover_statements() {
        let src = "qubits q; skip; q *= H;";
        let p = parse(src).unwrap();
        let s = p.body[1].span;
        assert_eq!(&src[s.start..s.end], "q *= H;");
    }

    #[test]
    fn pretty_round_trips() {
        for src in [
            "qubits q0; skip;",
            "qubits q0 q1; q0,q1 *= CNOT;",
            "qubits a b; unitary U = [[0.6, 0.8], [-0.8, 0.6]]; space P = span(0.1-0.25i*|1> + |0>); \
             if P on b { a *= U; } else { while zero on a { a *= H; } }",
        ] {
            let p = parse(src).unwrap();
            let text = pretty(&p);
            assert_eq!(parse(&text).unwrap(), p, "{text}");
        }
    }

    #[test]
    fn builtin_gates_are_unitary() {
        for g in BUILTIN_GATES {
            assert!(
                builtin_gate(g).unwrap().unitarity_deviation() < 1e-15,
                "{g}"
            );
        }
    }

    #[test]
    fn shadowing_and_duplicates() {
        let err = parse("qubits q q; skip;").unwrap_err();
        assert_eq!(kinds(err), vec![DiagnosticKind::DuplicateQubit]);
        let err = parse("qubits q; unitary H = [[1,0],[0,1]]; skip;").unwrap_err();
        assert_eq!(kinds(err), vec![DiagnosticKind::ShadowsBuiltin]);
        let err = parse("qubits q; space P = span(|0>); space P = span(|1>); skip;").unwrap_err();
        assert_eq!(kinds(err), vec![DiagnosticKind::DuplicateDeclaration]);
    }
}
