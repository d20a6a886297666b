//! Real-valued expression trees over one parameter and named constants.

use std::collections::HashMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sqrt,
    Exp,
    /// Only produced by differentiation; not callable from model files.
    Ln,
}

impl Func {
    pub const ALL: [Func; 4] = [Func::Sin, Func::Cos, Func::Sqrt, Func::Exp];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }

    pub fn lookup(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sqrt => x.sqrt(),
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// A named symbol: the model parameter or a constant.
    Sym(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Parameter name and constant values an expression is evaluated against.
#[derive(Clone, Debug, Default)]
pub struct Env {
    pub param: String,
    pub consts: HashMap<String, f64>,
}

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn sym(s: &str) -> Expr {
        Expr::Sym(s.to_string())
    }

    /// Value at parameter θ; unknown symbols are an error.
    pub fn eval(&self, env: &Env, theta: f64) -> Result<f64, String> {
        Ok(match self {
            Expr::Num(x) => *x,
            Expr::Sym(s) if *s == env.param => theta,
            Expr::Sym(s) => *env.consts.get(s).ok_or_else(|| format!("unknown symbol '{s}'"))?,
            Expr::Neg(a) => -a.eval(env, theta)?,
            Expr::Add(a, b) => a.eval(env, theta)? + b.eval(env, theta)?,
            Expr::Sub(a, b) => a.eval(env, theta)? - b.eval(env, theta)?,
            Expr::Mul(a, b) => a.eval(env, theta)? * b.eval(env, theta)?,
            Expr::Div(a, b) => a.eval(env, theta)? / b.eval(env, theta)?,
            Expr::Pow(a, b) => a.eval(env, theta)?.powf(b.eval(env, theta)?),
            Expr::Call(f, a) => f.apply(a.eval(env, theta)?),
        })
    }

    /// Every symbol mentioned, in order of first appearance.
    pub fn symbols(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Sym(s) => {
                if !out.contains(s) {
                    out.push(s.clone());
                }
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    pub fn depends_on(&self, name: &str) -> bool {
        self.symbols().iter().any(|s| s == name)
    }

    /// Symbolic derivative with respect to `var`.
    pub fn derivative(&self, var: &str) -> Expr {
        use Expr::*;
        let b = Box::new;
        match self {
            Num(_) => Num(0.0),
            Sym(s) => Num(if s == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)),
            Add(x, y) => add(x.derivative(var), y.derivative(var)),
            Sub(x, y) => sub(x.derivative(var), y.derivative(var)),
            Mul(x, y) => add(mul(x.derivative(var), (**y).clone()), mul((**x).clone(), y.derivative(var))),
            Div(x, y) => {
                let num = sub(mul(x.derivative(var), (**y).clone()), mul((**x).clone(), y.derivative(var)));
                div(num, Pow(y.clone(), b(Num(2.0))))
            }
            Pow(x, y) => {
                if !y.depends_on(var) {
                    // c·x^(c−1)·x'
                    let dec = match **y {
                        Num(k) => Num(k - 1.0),
                        _ => Sub(y.clone(), b(Num(1.0))),
                    };
                    mul(mul((**y).clone(), Pow(x.clone(), b(dec))), x.derivative(var))
                } else {
                    // x^y·(y'·ln x + y·x'/x)
                    mul(
                        self.clone(),
                        add(
                            mul(y.derivative(var), Call(Func::Ln, x.clone())),
                            div(mul((**y).clone(), x.derivative(var)), (**x).clone()),
                        ),
                    )
                }
            }
            Call(f, a) => {
                let inner = a.derivative(var);
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Call(Func::Sin, a.clone())),
                    Func::Sqrt => div(Num(0.5), Call(Func::Sqrt, a.clone())),
                    Func::Exp => Call(Func::Exp, a.clone()),
                    Func::Ln => div(Num(1.0), (**a).clone()),
                };
                mul(outer, inner)
            }
        }
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(x) if *x == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(x) if *x == 1.0)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => Expr::Num(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is_zero(&a) => b,
        _ if is_zero(&b) => a,
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is_zero(&b) => a,
        _ if is_zero(&a) => neg(b),
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is_zero(&a) || is_zero(&b) => Expr::Num(0.0),
        _ if is_one(&a) => b,
        _ if is_one(&b) => a,
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        Expr::Num(0.0)
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Num(..) | Expr::Sym(..) | Expr::Call(..) => 5,
    }
}

/// Writes `e`, parenthesised when its precedence is below `min`.
pub(crate) fn write_at(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "(")?;
        write_at(f, e, 0)?;
        return write!(f, ")");
    }
    match e {
        Expr::Num(x) => write!(f, "{x:?}"),
        Expr::Sym(s) => f.write_str(s),
        Expr::Neg(a) => {
            write!(f, "-")?;
            write_at(f, a, 3)
        }
        Expr::Add(a, b) => {
            write_at(f, a, 1)?;
            write!(f, " + ")?;
            write_at(f, b, 2)
        }
        Expr::Sub(a, b) => {
            write_at(f, a, 1)?;
            write!(f, " - ")?;
            write_at(f, b, 2)
        }
        Expr::Mul(a, b) => {
            write_at(f, a, 2)?;
            write!(f, "*")?;
            write_at(f, b, 3)
        }
        Expr::Div(a, b) => {
            write_at(f, a, 2)?;
            write!(f, "/")?;
            write_at(f, b, 3)
        }
        Expr::Pow(a, b) => {
            write_at(f, a, 5)?;
            write!(f, "^")?;
            write_at(f, b, 3)
        }
        Expr::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_at(f, a, 0)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_at(f, self, 0)
    }
}
