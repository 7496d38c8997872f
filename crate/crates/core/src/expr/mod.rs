//! Arithmetic expressions over `x`, `y`, `t` and `u`.
//!
//! Used for every model coefficient and for generating manufactured-solution
//! forcing. Exponents are restricted to nonnegative integer literals so that
//! differentiation is total.

mod calculus;
mod compiled;
mod parser;

use std::fmt;

pub use calculus::{differentiate, simplify};
pub use compiled::{Program, Staged, UNBOUND};
pub use parser::parse;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    T,
    U,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::X, Var::Y, Var::T, Var::U];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::T => "t",
            Var::U => "u",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 4] = [Func::Sin, Func::Cos, Func::Exp, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Expression tree node.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Base raised to a nonnegative integer literal.
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

/// Variable bindings for evaluation. Unbound variables are an error.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Env {
    values: [Option<f64>; 4],
}

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn xyt(x: f64, y: f64, t: f64) -> Self {
        Env::new().with(Var::X, x).with(Var::Y, y).with(Var::T, t)
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.values[var.index()] = Some(value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.values[var.index()] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.values[var.index()]
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Binary(BinOp::Add, Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Binary(BinOp::Sub, Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Binary(BinOp::Mul, Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Binary(BinOp::Div, Box::new(a), Box::new(b))
    }

    pub fn pow(a: Expr, n: u32) -> Expr {
        Expr::Pow(Box::new(a), n)
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// Evaluate with `env`; division by zero, domain errors, non-finite
    /// results and unbound variables are reported as [`Error::Eval`].
    pub fn eval(&self, env: &Env) -> Result<f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(var) => env
                .get(*var)
                .ok_or_else(|| Error::Eval(format!("unbound variable '{}'", var.name())))?,
            Expr::Neg(a) => -a.eval(env)?,
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(Error::Eval("division by zero".into()));
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(a, n) => a.eval(env)?.powi(*n as i32),
            Expr::Call(f, a) => {
                let a = a.eval(env)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(Error::Eval(format!("sqrt of negative value {a}")));
                        }
                        a.sqrt()
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eval(format!("non-finite result in {self}")))
        }
    }

    /// True if `var` occurs anywhere in the tree.
    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Variables occurring in the tree.
    pub fn variables(&self) -> Vec<Var> {
        Var::ALL.into_iter().filter(|&v| self.depends_on(v)).collect()
    }

    /// The literal value if the tree simplifies to a constant.
    pub fn as_constant(&self) -> Option<f64> {
        match simplify(self) {
            Expr::Num(v) => Some(v),
            _ => None,
        }
    }

    /// Replace every occurrence of `var` with `with`.
    pub fn substitute(&self, var: Var, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if *v == var => with.clone(),
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::neg(a.substitute(var, with)),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.substitute(var, with)), Box::new(b.substitute(var, with)))
            }
            Expr::Pow(a, n) => Expr::pow(a.substitute(var, with), *n),
            Expr::Call(f, a) => Expr::call(*f, a.substitute(var, with)),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }
}

/// Fully parenthesized canonical text; parses back to an equal tree up to
/// negative literals, which print as `(-(v))`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => write!(f, "(-{:?})", -v),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Pow(a, n) => write!(f, "({a}^{n})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}
