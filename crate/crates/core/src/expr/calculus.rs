//! Symbolic differentiation and algebraic simplification.

use super::{BinOp, Expr, Func, Var};

/// Exact symbolic derivative of `e` with respect to `var`, simplified.
pub fn differentiate(e: &Expr, var: Var) -> Expr {
    simplify(&derive(e, var))
}

fn derive(e: &Expr, var: Var) -> Expr {
    match e {
        Expr::Num(_) => Expr::Num(0.0),
        Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => Expr::neg(derive(a, var)),
        Expr::Binary(op, a, b) => {
            let (da, db) = (derive(a, var), derive(b, var));
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinOp::Add => Expr::add(da, db),
                BinOp::Sub => Expr::sub(da, db),
                BinOp::Mul => Expr::add(Expr::mul(da, b), Expr::mul(a, db)),
                BinOp::Div => Expr::div(
                    Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a, db)),
                    Expr::pow(b, 2),
                ),
            }
        }
        Expr::Pow(a, n) => match n {
            0 => Expr::Num(0.0),
            _ => Expr::mul(
                Expr::mul(Expr::Num(*n as f64), Expr::pow((**a).clone(), n - 1)),
                derive(a, var),
            ),
        },
        Expr::Call(f, a) => {
            let inner = (**a).clone();
            let outer = match f {
                Func::Sin => Expr::call(Func::Cos, inner),
                Func::Cos => Expr::neg(Expr::call(Func::Sin, inner)),
                Func::Exp => Expr::call(Func::Exp, inner),
                Func::Sqrt => {
                    return Expr::div(derive(a, var), Expr::mul(Expr::Num(2.0), Expr::call(Func::Sqrt, inner)));
                }
            };
            Expr::mul(outer, derive(a, var))
        }
    }
}

fn fold_call(f: Func, v: f64) -> Option<f64> {
    let r = match f {
        Func::Sin => v.sin(),
        Func::Cos => v.cos(),
        Func::Exp => v.exp(),
        Func::Sqrt if v >= 0.0 => v.sqrt(),
        Func::Sqrt => return None,
    };
    r.is_finite().then_some(r)
}

/// Constant folding plus the identities `0 + a = a`, `1 * a = a`,
/// `0 * a = 0`, `a^1 = a`, `a^0 = 1`. Folding never manufactures a
/// non-finite literal; such subtrees are left for evaluation to report.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Num(_) | Expr::Var(_) => e.clone(),
        Expr::Neg(a) => match simplify(a) {
            Expr::Num(v) => Expr::Num(-v),
            Expr::Neg(inner) => *inner,
            other => Expr::neg(other),
        },
        Expr::Binary(op, a, b) => simplify_binary(*op, simplify(a), simplify(b)),
        Expr::Pow(a, n) => {
            let a = simplify(a);
            match (a, *n) {
                (_, 0) => Expr::Num(1.0),
                (a, 1) => a,
                (Expr::Num(v), n) if v.powi(n as i32).is_finite() => Expr::Num(v.powi(n as i32)),
                (Expr::Pow(inner, m), n) => Expr::Pow(inner, m * n),
                (a, n) => Expr::pow(a, n),
            }
        }
        Expr::Call(f, a) => match simplify(a) {
            Expr::Num(v) => match fold_call(*f, v) {
                Some(r) => Expr::Num(r),
                None => Expr::call(*f, Expr::Num(v)),
            },
            other => Expr::call(*f, other),
        },
    }
}

fn simplify_binary(op: BinOp, a: Expr, b: Expr) -> Expr {
    use Expr::Num;
    if let (Num(x), Num(y)) = (&a, &b) {
        let r = match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => x / y,
        };
        if r.is_finite() && !(op == BinOp::Div && *y == 0.0) {
            return Num(r);
        }
        return Expr::Binary(op, Box::new(a), Box::new(b));
    }
    match op {
        BinOp::Add => match (a, b) {
            (Num(z), b) if z == 0.0 => b,
            (a, Num(z)) if z == 0.0 => a,
            (a, Expr::Neg(b)) => Expr::sub(a, *b),
            (a, b) => Expr::add(a, b),
        },
        BinOp::Sub => match (a, b) {
            (a, Num(z)) if z == 0.0 => a,
            (Num(z), b) if z == 0.0 => simplify(&Expr::neg(b)),
            (a, Expr::Neg(b)) => Expr::add(a, *b),
            (a, b) => Expr::sub(a, b),
        },
        BinOp::Mul => match (a, b) {
            (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
            (Num(o), b) if o == 1.0 => b,
            (a, Num(o)) if o == 1.0 => a,
            (Num(m), b) if m == -1.0 => simplify(&Expr::neg(b)),
            (a, Num(m)) if m == -1.0 => simplify(&Expr::neg(a)),
            // keep a single leading coefficient
            (a, Num(c)) => simplify_binary(BinOp::Mul, Num(c), a),
            (Num(c), Expr::Binary(BinOp::Mul, inner_a, inner_b)) if matches!(*inner_a, Num(_)) => {
                let Num(d) = *inner_a else { unreachable!() };
                simplify_binary(BinOp::Mul, Num(c * d), *inner_b)
            }
            (Num(c), Expr::Neg(b)) => simplify_binary(BinOp::Mul, Num(-c), *b),
            (Expr::Neg(a), Expr::Neg(b)) => Expr::mul(*a, *b),
            (a, b) => Expr::mul(a, b),
        },
        BinOp::Div => match (a, b) {
            (a, Num(o)) if o == 1.0 => a,
            (a, b) => Expr::div(a, b),
        },
    }
}
