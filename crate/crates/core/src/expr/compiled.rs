//! Flat postfix programs for fast repeated evaluation.
//!
//! [`Staged`] additionally hoists every maximal subtree that avoids a chosen
//! set of "dynamic" variables into per-point slots, so that e.g. the spatial
//! part of a forcing term is evaluated once per quadrature point rather than
//! once per time stage.

use super::{BinOp, Expr, Func, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Const(f64),
    Var(Var),
    Slot(usize),
    Uniform(usize),
    Neg,
    Bin(BinOp),
    Pow(u32),
    Call(Func),
}

/// Stack program equivalent to an [`Expr`].
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
    depth: usize,
    constant: Option<f64>,
}

const INLINE_STACK: usize = 32;

impl Program {
    pub fn compile(e: &Expr) -> Self {
        Self::build(e, &mut |_| None)
    }

    fn build(e: &Expr, hoist: &mut dyn FnMut(&Expr) -> Option<Op>) -> Self {
        let mut ops = Vec::new();
        emit(e, hoist, &mut ops);
        let constant = match ops.as_slice() {
            [Op::Const(v)] => Some(*v),
            _ => None,
        };
        Program {
            depth: stack_depth(&ops),
            ops,
            constant,
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    /// Evaluate with variable values indexed as `[x, y, t, u]`.
    #[inline]
    pub fn eval(&self, vars: &[f64; 4]) -> Result<f64> {
        self.eval_with_slots(vars, &[])
    }

    pub fn eval_with_slots(&self, vars: &[f64; 4], slots: &[f64]) -> Result<f64> {
        self.eval_staged(vars, slots, &[])
    }

    #[inline]
    fn eval_staged(&self, vars: &[f64; 4], slots: &[f64], uniforms: &[f64]) -> Result<f64> {
        if let Some(v) = self.constant {
            return Ok(v);
        }
        if self.depth <= INLINE_STACK {
            let mut stack = [0.0; INLINE_STACK];
            run(&self.ops, vars, slots, uniforms, &mut stack)
        } else {
            let mut stack = vec![0.0; self.depth];
            run(&self.ops, vars, slots, uniforms, &mut stack)
        }
    }
}

fn emit(e: &Expr, hoist: &mut dyn FnMut(&Expr) -> Option<Op>, ops: &mut Vec<Op>) {
    if let Some(op) = hoist(e) {
        ops.push(op);
        return;
    }
    match e {
        Expr::Num(v) => ops.push(Op::Const(*v)),
        Expr::Var(v) => ops.push(Op::Var(*v)),
        Expr::Neg(a) => {
            emit(a, hoist, ops);
            ops.push(Op::Neg);
        }
        Expr::Binary(op, a, b) => {
            emit(a, hoist, ops);
            emit(b, hoist, ops);
            ops.push(Op::Bin(*op));
        }
        Expr::Pow(a, n) => {
            emit(a, hoist, ops);
            ops.push(Op::Pow(*n));
        }
        Expr::Call(f, a) => {
            emit(a, hoist, ops);
            ops.push(Op::Call(*f));
        }
    }
}

fn stack_depth(ops: &[Op]) -> usize {
    let (mut cur, mut max) = (0usize, 0usize);
    for op in ops {
        match op {
            Op::Const(_) | Op::Var(_) | Op::Slot(_) | Op::Uniform(_) => cur += 1,
            Op::Bin(_) => cur -= 1,
            _ => {}
        }
        max = max.max(cur);
    }
    max
}

fn var_index(v: Var) -> usize {
    match v {
        Var::X => 0,
        Var::Y => 1,
        Var::T => 2,
        Var::U => 3,
    }
}

fn run(ops: &[Op], vars: &[f64; 4], slots: &[f64], uniforms: &[f64], stack: &mut [f64]) -> Result<f64> {
    let mut sp = 0;
    for op in ops {
        match *op {
            Op::Const(v) => {
                stack[sp] = v;
                sp += 1;
            }
            Op::Var(v) => {
                let x = vars[var_index(v)];
                if x.is_nan() {
                    return Err(Error::Eval(format!("unbound variable '{}'", v.name())));
                }
                stack[sp] = x;
                sp += 1;
            }
            Op::Slot(k) => {
                stack[sp] = slots[k];
                sp += 1;
            }
            Op::Uniform(k) => {
                stack[sp] = uniforms[k];
                sp += 1;
            }
            Op::Neg => stack[sp - 1] = -stack[sp - 1],
            Op::Bin(b) => {
                sp -= 1;
                let (a, r) = (stack[sp - 1], stack[sp]);
                stack[sp - 1] = match b {
                    BinOp::Add => a + r,
                    BinOp::Sub => a - r,
                    BinOp::Mul => a * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(Error::Eval("division by zero".into()));
                        }
                        a / r
                    }
                };
            }
            Op::Pow(n) => stack[sp - 1] = stack[sp - 1].powi(n as i32),
            Op::Call(f) => {
                let a = stack[sp - 1];
                stack[sp - 1] = match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(Error::Eval(format!("sqrt of negative value {a}")));
                        }
                        a.sqrt()
                    }
                };
            }
        }
    }
    let v = stack[0];
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Eval("non-finite result".into()))
    }
}

/// Three-tier program. Subtrees free of the dynamic variables are bound
/// once per point with [`Staged::bind`]; subtrees that depend only on
/// uniform variables (the same at every point, e.g. `t`) are evaluated once
/// per sweep with [`Staged::prepare`]; the remainder runs per point.
#[derive(Clone, Debug)]
pub struct Staged {
    statics: Vec<Program>,
    uniforms: Vec<Program>,
    dynamic: Program,
}

impl Staged {
    pub fn new(e: &Expr, dynamic: &[Var]) -> Self {
        Self::with_uniform(e, dynamic, &[])
    }

    /// `uniform` lists the dynamic variables that take one value per sweep.
    pub fn with_uniform(e: &Expr, dynamic: &[Var], uniform: &[Var]) -> Self {
        let mut statics: Vec<Program> = Vec::new();
        let mut uniforms: Vec<Program> = Vec::new();
        let mut hoist = |sub: &Expr| -> Option<Op> {
            if matches!(sub, Expr::Num(_) | Expr::Var(_)) {
                return None;
            }
            let vars = sub.variables();
            if dynamic.iter().all(|v| !vars.contains(v)) {
                statics.push(Program::compile(sub));
                return Some(Op::Slot(statics.len() - 1));
            }
            if vars.iter().all(|v| uniform.contains(v)) {
                let p = Program::compile(sub);
                let k = uniforms.iter().position(|q| *q == p).unwrap_or_else(|| {
                    uniforms.push(p);
                    uniforms.len() - 1
                });
                return Some(Op::Uniform(k));
            }
            None
        };
        let dynamic = Program::build(e, &mut hoist);
        Staged {
            statics,
            uniforms,
            dynamic,
        }
    }

    pub fn n_slots(&self) -> usize {
        self.statics.len()
    }

    /// Evaluate the static subtrees at `vars`, appending to `slots`.
    pub fn bind(&self, vars: &[f64; 4], slots: &mut Vec<f64>) -> Result<()> {
        for p in &self.statics {
            slots.push(p.eval(vars)?);
        }
        Ok(())
    }

    /// Values of the uniform subtrees for one sweep.
    pub fn prepare(&self, vars: &[f64; 4]) -> Result<Vec<f64>> {
        self.uniforms.iter().map(|p| p.eval(vars)).collect()
    }

    /// Per-point evaluation; `uniforms` comes from [`Staged::prepare`] and
    /// may be empty when no uniform variables were declared.
    #[inline]
    pub fn eval(&self, vars: &[f64; 4], slots: &[f64]) -> Result<f64> {
        self.dynamic.eval_staged(vars, slots, &[])
    }

    #[inline]
    pub fn eval_prepared(&self, vars: &[f64; 4], slots: &[f64], uniforms: &[f64]) -> Result<f64> {
        self.dynamic.eval_staged(vars, slots, uniforms)
    }
}

/// Variable vector with every entry unbound.
pub const UNBOUND: [f64; 4] = [f64::NAN; 4];
