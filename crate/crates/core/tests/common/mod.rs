//! Helpers shared by the integration tests: an assembly oracle written
//! directly from the bilinear forms, seeded random expression trees and a
//! pass/fail line printer.

#![allow(dead_code)]

pub mod oracle;

use airdg::expr::{BinOp, Expr, Func, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One acceptance line, printed so that `--nocapture` shows a summary.
pub fn report(criterion: &str, passed: bool, detail: impl std::fmt::Display) -> bool {
    println!("[{}] {criterion}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Random tree of at most `depth` levels whose literals are nonnegative.
/// Division and square roots only see arguments of the form `1 + s^2`, so
/// every tree is smooth wherever its exponentials stay finite.
pub fn random_tree(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.6) {
            Expr::var(Var::ALL[rng.gen_range(0..4)])
        } else {
            // a couple of decimal digits, plus the odd full-precision value
            let v = if rng.gen_bool(0.8) { (rng.gen_range(0..400) as f64) / 100.0 } else { rng.gen_range(0.0..3.0) };
            Expr::num(v)
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_tree(rng, depth - 1);
    let positive = |rng: &mut ChaCha8Rng| Expr::add(Expr::num(1.0), Expr::pow(random_tree(rng, depth - 1), 2));
    match rng.gen_range(0..9) {
        0 => Expr::neg(sub(rng)),
        1 => Expr::add(sub(rng), sub(rng)),
        2 => Expr::sub(sub(rng), sub(rng)),
        3 | 4 => Expr::mul(sub(rng), sub(rng)),
        5 => Expr::div(sub(rng), positive(rng)),
        6 => Expr::pow(sub(rng), rng.gen_range(0..4)),
        7 => {
            let f = [Func::Sin, Func::Cos, Func::Exp][rng.gen_range(0..3)];
            Expr::call(f, sub(rng))
        }
        _ => Expr::call(Func::Sqrt, positive(rng)),
    }
}

/// True if `e` contains a division (used to report tree coverage).
pub fn has_op(e: &Expr, want: BinOp) -> bool {
    match e {
        Expr::Num(_) | Expr::Var(_) => false,
        Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => has_op(a, want),
        Expr::Binary(op, a, b) => *op == want || has_op(a, want) || has_op(b, want),
    }
}
