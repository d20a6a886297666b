//! Text format for parameterised open-system models.
//!
//! ```text
//! [system]
//! param omega = 1.0
//! const gamma_x = 0.5
//! probe = plus
//!
//! [hamiltonian]
//! H = 0.5*omega*Z
//!
//! [dissipator]
//! dissipator: rate = gamma_x, op = X
//!
//! [sweep]
//! t0 = 0.0
//! t1 = 10.0
//! nt = 101
//! ```
//!
//! Operator literals are Pauli strings (`ZI`, `-iXY`; the leftmost letter is
//! the most significant tensor factor) or explicit matrices
//! `[[1, 0], [0, -1]]` with complex entries such as `0.5i` or `1 - 2i`.
//! Coefficients and rates are real expressions in the parameter and the
//! declared constants, using `+ - * / ^` and `sin cos sqrt exp`.

mod compile;
pub mod expr;
mod lexer;
mod parser;

use std::fmt;

use crate::linalg::C64;

pub use compile::{compile, CompiledModel};
pub use expr::{Env, Expr, Func};
pub use parser::parse_model;

/// Source position, 1-based. Positions never take part in structural comparison.
#[derive(Clone, Copy, Debug, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Pos {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagKind {
    Syntax,
    UnknownFunction,
    UnknownSymbol,
    Dimension,
    Semantic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub pos: Pos,
    pub kind: DiagKind,
    pub message: String,
    pub expected: Vec<String>,
}

impl Diagnostic {
    pub(crate) fn new(pos: Pos, kind: DiagKind, message: impl Into<String>, expected: &[&str]) -> Self {
        Self { pos, kind, message: message.into(), expected: expected.iter().map(|s| s.to_string()).collect() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.pos.line, self.pos.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Clone, Debug, PartialEq)]
pub enum OpLit {
    Pauli { negative: bool, imaginary: bool, letters: String },
    Matrix(Vec<Vec<C64>>),
}

impl OpLit {
    /// Hilbert-space dimension implied by the literal.
    pub fn dim(&self) -> usize {
        match self {
            OpLit::Pauli { letters, .. } => 1 << letters.len(),
            OpLit::Matrix(rows) => rows.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub default: f64,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub value: Expr,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Probe {
    /// Equal superposition of all basis states.
    Plus,
    Basis(usize),
    Vector(Vec<C64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: Expr,
    pub op: OpLit,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dissipator {
    pub rate: Expr,
    pub op: OpLit,
    pub pos: Pos,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepSpec {
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub nt: Option<usize>,
    pub params: Option<Vec<f64>>,
    pub route: Option<String>,
}

impl SweepSpec {
    fn is_empty(&self) -> bool {
        *self == SweepSpec::default()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub dim: Option<usize>,
    pub param: ParamDecl,
    pub consts: Vec<ConstDecl>,
    pub probe: Probe,
    pub hamiltonian: Vec<Term>,
    pub dissipators: Vec<Dissipator>,
    pub sweep: SweepSpec,
}

impl ModelSpec {
    /// Overrides the parameter default or a constant.
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), String> {
        if self.param.name == name {
            self.param.default = value;
            return Ok(());
        }
        match self.consts.iter_mut().find(|c| c.name == name) {
            Some(c) => {
                c.value = Expr::Num(value);
                Ok(())
            }
            None => Err(format!("no parameter or constant named '{name}'")),
        }
    }
}

fn write_complex(f: &mut fmt::Formatter<'_>, z: C64) -> fmt::Result {
    if z.im == 0.0 {
        write!(f, "{:?}", z.re)
    } else if z.re == 0.0 {
        write!(f, "{:?}i", z.im)
    } else if z.im < 0.0 {
        write!(f, "{:?} - {:?}i", z.re, -z.im)
    } else {
        write!(f, "{:?} + {:?}i", z.re, z.im)
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, v: &[C64]) -> fmt::Result {
    write!(f, "[")?;
    for (k, z) in v.iter().enumerate() {
        if k > 0 {
            write!(f, ", ")?;
        }
        write_complex(f, *z)?;
    }
    write!(f, "]")
}

impl fmt::Display for OpLit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpLit::Pauli { negative, imaginary, letters } => {
                if *negative {
                    write!(f, "-")?;
                }
                if *imaginary {
                    write!(f, "i")?;
                }
                f.write_str(letters)
            }
            OpLit::Matrix(rows) => {
                write!(f, "[")?;
                for (k, r) in rows.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write_list(f, r)?;
                }
                write!(f, "]")
            }
        }
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, t: &Term, first: bool) -> fmt::Result {
    let (negative, body) = match &t.coeff {
        Expr::Neg(inner) => (true, inner.as_ref()),
        other => (false, other),
    };
    match (first, negative) {
        (true, true) => write!(f, "-")?,
        (true, false) => {}
        (false, true) => write!(f, " - ")?,
        (false, false) => write!(f, " + ")?,
    }
    if *body != Expr::Num(1.0) {
        expr::write_at(f, body, 2)?;
        write!(f, "*")?;
    }
    write!(f, "{}", t.op)
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[system]")?;
        if let Some(d) = self.dim {
            writeln!(f, "dim = {d}")?;
        }
        writeln!(f, "param {} = {:?}", self.param.name, self.param.default)?;
        for c in &self.consts {
            writeln!(f, "const {} = {}", c.name, c.value)?;
        }
        match &self.probe {
            Probe::Plus => writeln!(f, "probe = plus")?,
            Probe::Basis(k) => writeln!(f, "probe = basis({k})")?,
            Probe::Vector(v) => {
                write!(f, "probe = ")?;
                write_list(f, v)?;
                writeln!(f)?;
            }
        }
        if !self.hamiltonian.is_empty() {
            writeln!(f, "\n[hamiltonian]")?;
            write!(f, "H = ")?;
            for (k, t) in self.hamiltonian.iter().enumerate() {
                write_term(f, t, k == 0)?;
            }
            writeln!(f)?;
        }
        if !self.dissipators.is_empty() {
            writeln!(f, "\n[dissipator]")?;
            for d in &self.dissipators {
                writeln!(f, "dissipator: rate = {}, op = {}", d.rate, d.op)?;
            }
        }
        if !self.sweep.is_empty() {
            writeln!(f, "\n[sweep]")?;
            let s = &self.sweep;
            if let Some(x) = s.t0 {
                writeln!(f, "t0 = {x:?}")?;
            }
            if let Some(x) = s.t1 {
                writeln!(f, "t1 = {x:?}")?;
            }
            if let Some(n) = s.nt {
                writeln!(f, "nt = {n}")?;
            }
            if let Some(p) = &s.params {
                let items: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
                writeln!(f, "params = [{}]", items.join(", "))?;
            }
            if let Some(r) = &s.route {
                writeln!(f, "route = {r}")?;
            }
        }
        Ok(())
    }
}
