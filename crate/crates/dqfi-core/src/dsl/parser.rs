use super::expr::{Expr, Func};
use super::lexer::{lex, Tok, Token};
use super::{
    ConstDecl, DiagKind, Diagnostic, Dissipator, ModelSpec, OpLit, ParamDecl, Pos, Probe, SweepSpec, Term,
};
use crate::linalg::{c, C64, ZERO};

const SECTIONS: [&str; 4] = ["system", "hamiltonian", "dissipator", "sweep"];
const EXPR_START: [&str; 4] = ["number", "identifier", "'('", "'-'"];

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    None,
    System,
    Hamiltonian,
    Dissipator,
    Sweep,
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
    symbols: Vec<(String, Pos)>,
}

type PResult<T> = Result<T, Diagnostic>;

fn is_pauli(s: &str) -> bool {
    let body = s.strip_prefix('i').unwrap_or(s);
    !body.is_empty() && body.chars().all(|ch| matches!(ch, 'I' | 'X' | 'Y' | 'Z'))
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>, expected: &[&str]) -> Diagnostic {
        let found = self.peek().describe();
        Diagnostic::new(self.pos(), DiagKind::Syntax, format!("{}, found {found}", message.into()), expected)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Pos> {
        if *self.peek() == tok {
            Ok(self.bump().pos)
        } else {
            Err(self.error(format!("expected {what}"), &[what]))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let p = self.bump().pos;
                Ok((s, p))
            }
            _ => Err(self.error(format!("expected {what}"), &[what])),
        }
    }

    fn end_of_line(&mut self) -> PResult<()> {
        match self.peek() {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::Eof => Ok(()),
            _ => Err(self.error("expected end of line", &["end of line"])),
        }
    }

    // expression grammar: sum > product > unary > power > atom

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Number(x) => {
                self.bump();
                Ok(Expr::Num(x))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let pos = self.pos();
                if *self.peek_at(1) == Tok::LParen {
                    let f = Func::lookup(&name).ok_or_else(|| {
                        Diagnostic::new(
                            pos,
                            DiagKind::UnknownFunction,
                            format!("unknown function '{name}'"),
                            &["sin", "cos", "sqrt", "exp"],
                        )
                    })?;
                    self.bump();
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if is_pauli(&name) {
                    return Err(Diagnostic::new(
                        pos,
                        DiagKind::Syntax,
                        format!("operator literal '{name}' inside an expression"),
                        &EXPR_START,
                    ));
                }
                self.bump();
                self.symbols.push((name.clone(), pos));
                Ok(Expr::Sym(name))
            }
            _ => Err(self.error("expected expression", &EXPR_START)),
        }
    }

    /// A constant real: optional sign and a number.
    fn real(&mut self) -> PResult<f64> {
        let neg = match self.peek() {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        match self.peek().clone() {
            Tok::Number(x) => {
                self.bump();
                Ok(if neg { -x } else { x })
            }
            _ => Err(self.error("expected number", &["number"])),
        }
    }

    fn count(&mut self) -> PResult<usize> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Number(x) if x >= 0.0 && x.fract() == 0.0 && x < 1e9 => {
                self.bump();
                Ok(x as usize)
            }
            _ => Err(Diagnostic::new(pos, DiagKind::Syntax, "expected a non-negative integer", &["integer"])),
        }
    }

    fn is_imag_unit(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == "i")
    }

    /// Complex constant such as `0.5`, `-2i`, `1 - 0.5i`.
    fn complex(&mut self) -> PResult<C64> {
        let mut acc = ZERO;
        let mut first = true;
        loop {
            let sign = match self.peek() {
                Tok::Minus => {
                    self.bump();
                    -1.0
                }
                Tok::Plus => {
                    self.bump();
                    1.0
                }
                _ if first => 1.0,
                _ => return Ok(acc),
            };
            first = false;
            match self.peek().clone() {
                Tok::Number(x) => {
                    self.bump();
                    if self.is_imag_unit() {
                        self.bump();
                        acc += c(0.0, sign * x);
                    } else if *self.peek() == Tok::Star && matches!(self.peek_at(1), Tok::Ident(s) if s == "i") {
                        self.bump();
                        self.bump();
                        acc += c(0.0, sign * x);
                    } else {
                        acc += c(sign * x, 0.0);
                    }
                }
                Tok::Ident(s) if s == "i" => {
                    self.bump();
                    acc += c(0.0, sign);
                }
                _ => return Err(self.error("expected complex number", &["number", "'i'"])),
            }
        }
    }

    fn complex_list(&mut self) -> PResult<Vec<C64>> {
        self.expect(Tok::LBracket, "'['")?;
        let mut out = vec![self.complex()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.complex()?);
        }
        self.expect(Tok::RBracket, "']'")?;
        Ok(out)
    }

    fn at_op_literal(&self) -> bool {
        match self.peek() {
            Tok::LBracket => true,
            Tok::Ident(s) => is_pauli(s) && *self.peek_at(1) != Tok::LParen,
            _ => false,
        }
    }

    fn op_literal(&mut self) -> PResult<OpLit> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::LBracket => {
                self.bump();
                let mut rows = vec![self.complex_list()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    rows.push(self.complex_list()?);
                }
                self.expect(Tok::RBracket, "']'")?;
                let n = rows.len();
                if let Some(bad) = rows.iter().position(|r| r.len() != n) {
                    return Err(Diagnostic::new(
                        pos,
                        DiagKind::Dimension,
                        format!("matrix row {} has {} entries, expected {n}", bad + 1, rows[bad].len()),
                        &["square matrix"],
                    ));
                }
                Ok(OpLit::Matrix(rows))
            }
            Tok::Ident(s) if is_pauli(&s) => {
                self.bump();
                let imaginary = s.starts_with('i');
                let letters = s.trim_start_matches('i').to_string();
                Ok(OpLit::Pauli { negative: false, imaginary, letters })
            }
            _ => Err(self.error("expected operator literal", &["Pauli string", "'['"])),
        }
    }

    fn signed_op(&mut self) -> PResult<OpLit> {
        let negative = match self.peek() {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        let op = self.op_literal()?;
        Ok(match op {
            OpLit::Pauli { imaginary, letters, .. } => OpLit::Pauli { negative, imaginary, letters },
            OpLit::Matrix(rows) if negative => OpLit::Matrix(rows.into_iter().map(|r| r.into_iter().map(|z| -z).collect()).collect()),
            m => m,
        })
    }

    /// `[±] factor (*|/ factor)* * operator` or a bare operator.
    fn term(&mut self) -> PResult<Term> {
        let pos = self.pos();
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let wrap = |e: Expr| if negative { Expr::Neg(Box::new(e)) } else { e };
        if self.at_op_literal() {
            let op = self.op_literal()?;
            return Ok(Term { coeff: wrap(Expr::Num(1.0)), op, pos });
        }
        let mut coeff = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    if self.at_op_literal() {
                        let op = self.op_literal()?;
                        return Ok(Term { coeff: wrap(coeff), op, pos });
                    }
                    if !matches!(self.peek(), Tok::Number(_) | Tok::Ident(_) | Tok::LParen | Tok::Minus) {
                        return Err(self.error(
                            "expected factor or operator literal",
                            &["number", "identifier", "'('", "'-'", "Pauli string", "'['"],
                        ));
                    }
                    coeff = Expr::Mul(Box::new(coeff), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    coeff = Expr::Div(Box::new(coeff), Box::new(self.unary()?));
                }
                _ => return Err(self.error("term has no operator", &["'*'", "'/'"])),
            }
        }
    }

    fn terms(&mut self) -> PResult<Vec<Term>> {
        let mut out = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    out.push(self.term()?);
                }
                Tok::Minus => {
                    // the minus belongs to the next term
                    out.push(self.term()?);
                }
                _ => return Ok(out),
            }
        }
    }

    fn section_header(&mut self) -> PResult<Section> {
        self.expect(Tok::LBracket, "'['")?;
        let (name, pos) = self.ident("section name")?;
        let s = match name.as_str() {
            "system" => Section::System,
            "hamiltonian" => Section::Hamiltonian,
            "dissipator" => Section::Dissipator,
            "sweep" => Section::Sweep,
            _ => return Err(Diagnostic::new(pos, DiagKind::Syntax, format!("unknown section '{name}'"), &SECTIONS)),
        };
        self.expect(Tok::RBracket, "']'")?;
        self.end_of_line()?;
        Ok(s)
    }

    fn system_line(&mut self, spec: &mut Partial) -> PResult<()> {
        let (key, pos) = self.ident("'dim', 'param', 'const' or 'probe'")?;
        match key.as_str() {
            "dim" => {
                self.expect(Tok::Equals, "'='")?;
                let d = self.count()?;
                if d == 0 {
                    return Err(Diagnostic::new(pos, DiagKind::Dimension, "dimension must be positive", &["integer"]));
                }
                spec.dim = Some(d);
            }
            "param" => {
                let (name, npos) = self.ident("parameter name")?;
                self.expect(Tok::Equals, "'='")?;
                let default = self.real()?;
                if spec.param.is_some() {
                    return Err(Diagnostic::new(pos, DiagKind::Semantic, "parameter declared twice", &["const"]));
                }
                spec.param = Some(ParamDecl { name, default, pos: npos });
            }
            "const" => {
                let (name, npos) = self.ident("constant name")?;
                self.expect(Tok::Equals, "'='")?;
                let value = self.expr()?;
                spec.consts.push(ConstDecl { name, value, pos: npos });
            }
            "probe" => {
                self.expect(Tok::Equals, "'='")?;
                spec.probe = Some(match self.peek().clone() {
                    Tok::LBracket => Probe::Vector(self.complex_list()?),
                    Tok::Ident(s) if s == "plus" => {
                        self.bump();
                        Probe::Plus
                    }
                    Tok::Ident(s) if s == "basis" => {
                        self.bump();
                        self.expect(Tok::LParen, "'('")?;
                        let k = self.count()?;
                        self.expect(Tok::RParen, "')'")?;
                        Probe::Basis(k)
                    }
                    _ => return Err(self.error("expected probe", &["plus", "basis(k)", "'['"])),
                });
            }
            _ => {
                return Err(Diagnostic::new(
                    pos,
                    DiagKind::Syntax,
                    format!("unknown key '{key}' in [system]"),
                    &["dim", "param", "const", "probe"],
                ))
            }
        }
        self.end_of_line()
    }

    fn hamiltonian_line(&mut self, spec: &mut Partial) -> PResult<()> {
        let (name, pos) = self.ident("'H'")?;
        if name != "H" {
            return Err(Diagnostic::new(pos, DiagKind::Syntax, format!("expected 'H', found '{name}'"), &["H"]));
        }
        match self.peek() {
            Tok::Equals | Tok::PlusEquals => {
                self.bump();
            }
            _ => return Err(self.error("expected '=' or '+='", &["'='", "'+='"])),
        }
        let terms = self.terms()?;
        spec.hamiltonian.extend(terms);
        self.end_of_line()
    }

    fn dissipator_line(&mut self, spec: &mut Partial) -> PResult<()> {
        let pos = self.pos();
        if matches!(self.peek(), Tok::Ident(s) if s == "dissipator") {
            self.bump();
            self.expect(Tok::Colon, "':'")?;
        }
        let (mut rate, mut op) = (None, None);
        loop {
            let (key, kpos) = self.ident("'rate' or 'op'")?;
            self.expect(Tok::Equals, "'='")?;
            match key.as_str() {
                "rate" if rate.is_none() => rate = Some(self.expr()?),
                "op" if op.is_none() => op = Some(self.signed_op()?),
                _ => {
                    return Err(Diagnostic::new(
                        kpos,
                        DiagKind::Syntax,
                        format!("unexpected key '{key}'"),
                        &[if rate.is_none() { "rate" } else { "op" }],
                    ))
                }
            }
            if *self.peek() == Tok::Comma {
                self.bump();
                continue;
            }
            break;
        }
        let rate = rate.ok_or_else(|| self.error("dissipator without rate", &["','", "rate"]))?;
        let op = op.ok_or_else(|| self.error("dissipator without operator", &["','", "op"]))?;
        spec.dissipators.push(Dissipator { rate, op, pos });
        self.end_of_line()
    }

    fn sweep_line(&mut self, spec: &mut Partial) -> PResult<()> {
        let (key, pos) = self.ident("sweep key")?;
        self.expect(Tok::Equals, "'='")?;
        let s = &mut spec.sweep;
        match key.as_str() {
            "t0" => s.t0 = Some(self.real()?),
            "t1" => s.t1 = Some(self.real()?),
            "nt" => s.nt = Some(self.count()?),
            "params" => {
                self.expect(Tok::LBracket, "'['")?;
                let mut v = vec![self.real()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    v.push(self.real()?);
                }
                self.expect(Tok::RBracket, "']'")?;
                s.params = Some(v);
            }
            "route" => s.route = Some(self.ident("route name")?.0),
            _ => {
                return Err(Diagnostic::new(
                    pos,
                    DiagKind::Syntax,
                    format!("unknown key '{key}' in [sweep]"),
                    &["t0", "t1", "nt", "params", "route"],
                ))
            }
        }
        self.end_of_line()
    }
}

#[derive(Default)]
struct Partial {
    dim: Option<usize>,
    param: Option<ParamDecl>,
    consts: Vec<ConstDecl>,
    probe: Option<Probe>,
    hamiltonian: Vec<Term>,
    dissipators: Vec<Dissipator>,
    sweep: SweepSpec,
}

/// Parses a model file into its syntax tree.
///
/// Symbols must be the declared parameter or a constant; the parameter
/// defaults to `theta = 0` when not declared.
pub fn parse_model(text: &str) -> Result<ModelSpec, Diagnostic> {
    let mut p = Parser { toks: lex(text)?, at: 0, symbols: Vec::new() };
    let mut spec = Partial::default();
    let mut section = Section::None;
    loop {
        match p.peek() {
            Tok::Eof => break,
            Tok::Newline => {
                p.bump();
                continue;
            }
            Tok::LBracket => {
                section = p.section_header()?;
                continue;
            }
            _ => {}
        }
        match section {
            Section::None => return Err(p.error("expected section header", &["'['"])),
            Section::System => p.system_line(&mut spec)?,
            Section::Hamiltonian => p.hamiltonian_line(&mut spec)?,
            Section::Dissipator => p.dissipator_line(&mut spec)?,
            Section::Sweep => p.sweep_line(&mut spec)?,
        }
    }
    let param = spec.param.unwrap_or(ParamDecl { name: "theta".into(), default: 0.0, pos: Pos { line: 1, col: 1 } });
    let mut known: Vec<&str> = vec![param.name.as_str()];
    known.extend(spec.consts.iter().map(|c| c.name.as_str()));
    if let Some(dup) = spec.consts.iter().find(|c| spec.consts.iter().filter(|d| d.name == c.name).count() > 1 || c.name == param.name) {
        return Err(Diagnostic::new(dup.pos, DiagKind::Semantic, format!("'{}' declared twice", dup.name), &["a new name"]));
    }
    for (name, pos) in &p.symbols {
        if !known.contains(&name.as_str()) {
            let expected: Vec<&str> = known.clone();
            return Err(Diagnostic::new(*pos, DiagKind::UnknownSymbol, format!("unknown symbol '{name}'"), &expected));
        }
    }
    Ok(ModelSpec {
        dim: spec.dim,
        param,
        consts: spec.consts,
        probe: spec.probe.unwrap_or(Probe::Plus),
        hamiltonian: spec.hamiltonian,
        dissipators: spec.dissipators,
        sweep: spec.sweep,
    })
}
